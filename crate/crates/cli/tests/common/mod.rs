#![allow(dead_code)]

pub mod tdist;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use navgym_cli::RunConfig;
use navgym_nn::ConvSpec;
use navgym_sac::train::RunParams;
use navgym_sac::SacConfig;

pub fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn fixture(name: &str) -> PathBuf {
    root().join("fixtures").join(name)
}

pub fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("navgym-cli-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&d);
    fs::create_dir_all(&d).unwrap();
    d
}

/// Small, fast training config on toy_desk.
pub fn tiny(out: &Path, budget: u64) -> RunConfig {
    let mut c = RunConfig {
        map: fixture("toy_desk.map.json"),
        out: out.to_path_buf(),
        seed: 3,
        budget,
        deterministic: true,
        sac: SacConfig {
            batch_size: 4,
            burn_in: 2,
            train_len: 6,
            learning_starts: 300,
            replay_capacity: 20_000,
            ..SacConfig::default()
        },
        run: RunParams {
            metrics_every: 100,
            checkpoint_every: 500,
            eval_every: 0,
            ..RunParams::default()
        },
        ..RunConfig::default()
    };
    let conv = ConvSpec {
        channels: vec![2],
        kernel: 3,
        stride: 2,
        padding: 1,
    };
    c.network.conv3d = conv.clone();
    c.network.conv2d = conv;
    c.network.vec_width = 8;
    c.network.trunk_width = 12;
    c.network.trunk_depth = 1;
    c.network.lstm_hidden = Some(6);
    c.network.head_width = 10;
    c
}

pub fn write_config(dir: &Path, cfg: &RunConfig) -> PathBuf {
    let p = dir.join("run.json");
    fs::write(&p, cfg.to_json()).unwrap();
    p
}

pub fn navgym(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_navgym"))
        .args(args)
        .current_dir(root())
        .output()
        .unwrap()
}

pub fn text(b: &[u8]) -> String {
    String::from_utf8_lossy(b).into_owned()
}
