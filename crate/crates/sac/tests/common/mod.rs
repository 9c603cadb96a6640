#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use navgym_core::env::NavEnv;
use navgym_core::obs::ObsConfig;
use navgym_core::sim::{Action, CurriculumState, EpisodeStatus, SimConfig};
use navgym_core::world::{bake_occupancy, load_map, MapDef, VoxelGrid};
use navgym_nn::{ConvSpec, NetworkSpec};
use navgym_sac::{Episode, EpisodeBuilder};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

pub fn desk() -> (Arc<MapDef>, Arc<VoxelGrid>) {
    let map = load_map(fixture("toy_desk.map.json")).unwrap();
    let grid = bake_occupancy(&map, ObsConfig::default().cell_size).unwrap();
    (Arc::new(map), Arc::new(grid))
}

/// Small network over the default observation sizes.
pub fn tiny_spec() -> NetworkSpec {
    NetworkSpec {
        conv3d: ConvSpec {
            channels: vec![2],
            kernel: 3,
            stride: 2,
            padding: 1,
        },
        conv2d: ConvSpec {
            channels: vec![2],
            kernel: 3,
            stride: 2,
            padding: 1,
        },
        vec_width: 8,
        trunk_width: 12,
        trunk_depth: 1,
        lstm_hidden: Some(6),
        head_width: 10,
        ..NetworkSpec::default()
    }
}

pub fn env(map: &Arc<MapDef>, grid: &Arc<VoxelGrid>) -> NavEnv {
    NavEnv::new(map.clone(), grid.clone(), SimConfig::default(), ObsConfig::default())
}

/// Random-action episode at `radius`, cut after `max_len` steps.
pub fn random_episode(env: &mut NavEnv, radius: f64, max_len: usize, r: &mut ChaCha8Rng) -> Episode {
    let cur = CurriculumState::fixed(radius, 1, 0.5);
    let obs = env.reset(&cur, r).unwrap();
    let mut b = EpisodeBuilder::new(&env.obs, &obs, env.agent());
    loop {
        let a = Action::new(
            r.random_range(-1.0..=1.0),
            r.random_range(-1.0..=1.0),
            r.random_range(-1.0..=1.0),
            r.random_range(-1.0..=1.0),
        );
        let out = env.step(a);
        let success = out.status == EpisodeStatus::Success;
        b.push(a, out.reward, success, &out.obs, env.agent());
        if out.status.is_done() || b.len() >= max_len {
            break;
        }
    }
    b.finish(env.episode().goal, radius)
}
