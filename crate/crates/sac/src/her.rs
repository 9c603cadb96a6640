//! Hindsight goal relabeling.

use navgym_core::sim::{compute_reward, SimConfig};
use rand::Rng;

use crate::config::HerStrategy;
use crate::replay::Episode;

/// Copy of `ep` aimed at `goal`: rewards replayed from step 0 and the
/// episode cut at the first step within `goal_epsilon`.
pub fn relabel_to(ep: &Episode, goal: glam::DVec3, cfg: &SimConfig) -> Episode {
    let t = &ep.traj;
    let mut best = t.positions[0].distance(goal);
    let mut rewards = Vec::new();
    let mut dones = Vec::new();
    for k in 0..ep.len() {
        let d = t.achieved(k).distance(goal);
        rewards.push(compute_reward(d, best, cfg.step_penalty, cfg.goal_epsilon) as f32);
        best = best.min(d);
        let hit = d <= cfg.goal_epsilon;
        dones.push(hit);
        if hit {
            break;
        }
    }
    Episode {
        traj: t.clone(),
        goal,
        rewards,
        dones,
        radius: ep.radius,
        relabeled: true,
    }
}

/// Relabeled copies of `ep`. `Final` aims at the last achieved position;
/// `Future` picks an anchor step `t` and a later step `k` in `t+1..len`.
/// Episodes shorter than two steps yield nothing.
pub fn relabel_her<R: Rng + ?Sized>(
    ep: &Episode,
    strategy: HerStrategy,
    copies: usize,
    rng: &mut R,
    cfg: &SimConfig,
) -> Vec<Episode> {
    let n = ep.len();
    if n < 2 {
        return Vec::new();
    }
    (0..copies)
        .map(|_| {
            let k = match strategy {
                HerStrategy::Final => n - 1,
                HerStrategy::Future => {
                    let t = rng.random_range(0..n - 1);
                    future_step(t, n, rng)
                }
            };
            relabel_to(ep, ep.traj.achieved(k), cfg)
        })
        .collect()
}

/// Step whose achieved position serves as the goal for anchor `t`.
pub fn future_step<R: Rng + ?Sized>(t: usize, n: usize, rng: &mut R) -> usize {
    rng.random_range(t + 1..n)
}
