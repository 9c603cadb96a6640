mod common;

use std::sync::Arc;

use common::*;
use navgym_core::sim::{compute_reward, SimConfig};
use navgym_sac::her::{future_step, relabel_her, relabel_to};
use navgym_sac::HerStrategy;
use proptest::prelude::*;

#[test]
fn final_goal_is_reached_on_the_last_kept_step() {
    let (map, grid) = desk();
    let mut e = env(&map, &grid);
    let mut r = rng(1);
    let sim = SimConfig::default();
    for _ in 0..20 {
        let ep = random_episode(&mut e, 30.0, 60, &mut r);
        if ep.len() < 2 {
            continue;
        }
        let out = relabel_her(&ep, HerStrategy::Final, 1, &mut r, &sim);
        let h = &out[0];
        let n = h.len();
        let d = h.traj.achieved(n - 1).distance(h.goal);
        assert!(d <= sim.goal_epsilon);
        assert!(h.rewards[n - 1] >= 1.0 + sim.step_penalty as f32 - 1e-6);
        assert!(h.success() && h.relabeled);
        assert!(Arc::ptr_eq(&h.traj, &ep.traj));
    }
}

#[test]
fn length_two_future_goal_comes_from_the_last_step() {
    let mut r = rng(2);
    for _ in 0..100 {
        assert_eq!(future_step(0, 2, &mut r), 1);
    }
}

#[test]
fn short_episodes_are_not_relabeled() {
    let (map, grid) = desk();
    let mut e = env(&map, &grid);
    let mut r = rng(3);
    let ep = random_episode(&mut e, 30.0, 1, &mut r);
    assert!(relabel_her(&ep, HerStrategy::Future, 3, &mut r, &SimConfig::default()).is_empty());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn relabeled_rewards_replay_from_scratch(seed in 0u64..10_000, len in 2usize..80, future in any::<bool>()) {
        let (map, grid) = desk();
        let mut e = env(&map, &grid);
        let mut r = rng(seed);
        let sim = SimConfig::default();
        let ep = random_episode(&mut e, 30.0, len, &mut r);
        prop_assume!(ep.len() >= 2);
        let strategy = if future { HerStrategy::Future } else { HerStrategy::Final };
        for h in relabel_her(&ep, strategy, 2, &mut r, &sim) {
            // direct replay over stored positions
            let pos = &ep.traj.positions;
            let mut best = pos[0].distance(h.goal);
            let mut expect = Vec::new();
            for k in 0..ep.len() {
                let d = pos[k + 1].distance(h.goal);
                expect.push(compute_reward(d, best, sim.step_penalty, sim.goal_epsilon) as f32);
                if d < best {
                    best = d;
                }
                if d <= sim.goal_epsilon {
                    break;
                }
            }
            prop_assert_eq!(&h.rewards, &expect);
            let n = h.len();
            prop_assert!(h.dones[..n - 1].iter().all(|d| !d));
            prop_assert!(h.dones[n - 1]);
            prop_assert_eq!(&h, &relabel_to(&ep, h.goal, &sim));
        }
    }
}
