mod common;

use std::fs;
use std::path::PathBuf;

use common::*;
use navgym_sac::train::{evaluate, load_policy, RunParams, METRICS_HEADER};
use navgym_sac::{CurriculumConfig, HerStrategy, SacConfig, TrainConfig, Trainer};

fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("navgym-sac-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&d);
    d
}

fn small(budget: u64) -> TrainConfig {
    TrainConfig {
        seed: 7,
        budget,
        deterministic: true,
        network: tiny_spec(),
        sac: SacConfig {
            batch_size: 4,
            burn_in: 2,
            train_len: 6,
            learning_starts: 300,
            replay_capacity: 20_000,
            ..SacConfig::default()
        },
        curriculum: CurriculumConfig {
            window: 5,
            ..CurriculumConfig::default()
        },
        run: RunParams {
            metrics_every: 100,
            checkpoint_every: 500,
            eval_every: 0,
            ..RunParams::default()
        },
        ..TrainConfig::default()
    }
}

fn train_to(cfg: TrainConfig, dir: &PathBuf) -> Trainer {
    let (map, grid) = desk();
    let mut t = Trainer::new(cfg, map, grid, Some(dir)).unwrap();
    t.run().unwrap();
    t
}

#[test]
fn same_seed_same_metrics() {
    let (a, b) = (scratch("det-a"), scratch("det-b"));
    train_to(small(1500), &a);
    train_to(small(1500), &b);
    let ma = fs::read(a.join("metrics.csv")).unwrap();
    assert_eq!(ma, fs::read(b.join("metrics.csv")).unwrap());
    assert_eq!(fs::read(a.join("episodes.csv")).unwrap(), fs::read(b.join("episodes.csv")).unwrap());
    let text = String::from_utf8(ma).unwrap();
    assert_eq!(text.lines().next(), Some(METRICS_HEADER));
    assert_eq!(text.lines().count(), 1 + 15);
    // radius never shrinks
    let radii: Vec<f64> = text.lines().skip(1).map(|l| l.split(',').nth(2).unwrap().parse().unwrap()).collect();
    assert!(radii.windows(2).all(|w| w[0] <= w[1]));
    let ups: Vec<u64> = text.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(*ups.last().unwrap(), (1500 - 300) / 4 + 1);
}

#[test]
fn no_curriculum_stays_at_the_final_radius() {
    let dir = scratch("nocur");
    let mut cfg = small(800);
    cfg.curriculum.enabled = false;
    let t = train_to(cfg, &dir);
    let max = t.curriculum.radius_max;
    assert_eq!(t.curriculum.radius, max);
    let text = fs::read_to_string(dir.join("metrics.csv")).unwrap();
    for l in text.lines().skip(1) {
        let r: f64 = l.split(',').nth(2).unwrap().parse().unwrap();
        assert!((r - max).abs() < 1e-3);
    }
    let (map, _) = desk();
    let e = map.bounds.max - map.bounds.min;
    assert!((max - e.x.hypot(e.z)).abs() < 1e-12);
}

#[test]
fn zero_budget_writes_only_headers() {
    let dir = scratch("zero");
    let t = train_to(small(0), &dir);
    assert_eq!(t.env_steps, 0);
    assert_eq!(fs::read_to_string(dir.join("metrics.csv")).unwrap(), format!("{METRICS_HEADER}\n"));
    assert!(dir.join("summary.json").exists());
}

#[test]
fn no_lstm_checkpoint_has_no_recurrent_layer() {
    let dir = scratch("nolstm");
    let mut cfg = small(400);
    cfg.network.lstm_hidden = None;
    train_to(cfg, &dir);
    let p = load_policy(&dir.join("checkpoints/latest.ngck")).unwrap();
    assert_eq!(p.nets.spec.lstm_hidden, None);
    assert_eq!(p.nets.encoder.hidden_size(), 0);
}

#[test]
fn checkpoint_round_trip_and_resume() {
    let dir = scratch("resume");
    let t = train_to(small(1000), &dir);
    let ck = dir.join("checkpoints/latest.ngck");
    let (map, grid) = desk();
    let mut r = Trainer::resume(&ck, Some(1400), map, grid, Some(&dir)).unwrap();
    assert_eq!(r.state, t.state);
    assert_eq!(r.env_steps, 1000);
    assert_eq!(r.curriculum, t.curriculum);
    assert_eq!(r.replay.steps(), 0);
    let s = r.run().unwrap();
    assert_eq!(s.env_steps, 1400);
    let text = fs::read_to_string(dir.join("metrics.csv")).unwrap();
    assert_eq!(text.lines().filter(|l| *l == METRICS_HEADER).count(), 1);
    assert_eq!(text.lines().count(), 1 + 14);
}

#[test]
fn threaded_collectors_spend_the_budget() {
    let mut cfg = small(1200);
    cfg.deterministic = false;
    cfg.run.collectors = 3;
    let (map, grid) = desk();
    let mut t = Trainer::new(cfg, map, grid, None).unwrap();
    assert!(t.collector_count() >= 1);
    let s = t.run().unwrap();
    assert_eq!(s.env_steps, 1200);
    assert!(s.updates > 0);
}

#[test]
fn her_adds_relabeled_episodes() {
    let mut cfg = small(600);
    cfg.sac.her = Some(HerStrategy::Future);
    let (map, grid) = desk();
    let mut t = Trainer::new(cfg, map, grid, None).unwrap();
    t.run().unwrap();
    let relabeled = (0..t.replay.episodes()).filter(|&i| t.replay.episode(i).relabeled).count();
    assert!(relabeled > 0);
}

#[test]
fn evaluation_is_reproducible() {
    let (map, grid) = desk();
    let t = Trainer::new(small(0), map.clone(), grid.clone(), None).unwrap();
    let run = |n| {
        evaluate(
            &t.nets,
            &t.state.encoder,
            &t.state.policy,
            map.clone(),
            grid.clone(),
            t.cfg.sim,
            t.cfg.obs,
            20.0,
            n,
            3,
        )
        .unwrap()
    };
    let a = run(5);
    assert_eq!(a, run(5));
    assert_eq!(a.episodes.len(), 5);
    let empty = run(0);
    assert!(empty.episodes.is_empty());
    assert_eq!(empty.success_rate(), 0.0);
}
