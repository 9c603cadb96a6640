//! Episode storage and windowed sampling.
//!
//! Observations are stored without their goal-dependent features so that
//! relabeled copies can share the per-step data and recompute those features
//! for a new goal.

use std::collections::VecDeque;
use std::sync::Arc;

use glam::DVec3;
use navgym_core::obs::{abs_positions, relative_goal, ObsConfig, Observation, ABS_DIM, SCALAR_DIM};
use navgym_core::sim::{Action, AgentState};
use navgym_core::world::MapDef;
use navgym_nn::{ObsBatch, Real};
use rand::Rng;
use thiserror::Error;

pub const VEC_DIM: usize = SCALAR_DIM + ABS_DIM;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ReplayError {
    #[error("replay buffer holds no episodes")]
    Empty,
}

/// Goal-independent per-step data of one rollout. Holds `steps + 1`
/// observations.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    occ_words: usize,
    occupancy: Vec<u64>,
    depth_len: usize,
    depth: Vec<f32>,
    /// Motion scalars with the relative-goal slots zeroed.
    motion: Vec<[f32; SCALAR_DIM]>,
    pub positions: Vec<DVec3>,
    pub yaws: Vec<f64>,
    pub actions: Vec<[f32; 4]>,
}

impl Trajectory {
    fn new(cfg: &ObsConfig) -> Self {
        Self {
            occ_words: cfg.occ_len().div_ceil(64),
            occupancy: Vec::new(),
            depth_len: cfg.depth_len(),
            depth: Vec::new(),
            motion: Vec::new(),
            positions: Vec::new(),
            yaws: Vec::new(),
            actions: Vec::new(),
        }
    }

    fn push_obs(&mut self, obs: &Observation, agent: &AgentState) {
        let start = self.occupancy.len();
        self.occupancy.resize(start + self.occ_words, 0);
        for (i, &v) in obs.occupancy.iter().enumerate() {
            if v != 0.0 {
                self.occupancy[start + i / 64] |= 1 << (i % 64);
            }
        }
        self.depth.extend_from_slice(&obs.depth);
        let mut m = obs.scalars;
        m[6..9].fill(0.0);
        self.motion.push(m);
        self.positions.push(agent.position);
        self.yaws.push(agent.yaw);
    }

    pub fn steps(&self) -> usize {
        self.actions.len()
    }

    /// Achieved position after step `k`.
    pub fn achieved(&self, k: usize) -> DVec3 {
        self.positions[k + 1]
    }
}

/// Incrementally records a rollout.
#[derive(Debug, Clone)]
pub struct EpisodeBuilder {
    traj: Trajectory,
    rewards: Vec<f32>,
    done: bool,
}

impl EpisodeBuilder {
    pub fn new(cfg: &ObsConfig, obs: &Observation, agent: &AgentState) -> Self {
        let mut traj = Trajectory::new(cfg);
        traj.push_obs(obs, agent);
        Self {
            traj,
            rewards: Vec::new(),
            done: false,
        }
    }

    /// Adds a transition; `success` marks a terminal step.
    pub fn push(&mut self, action: Action, reward: f64, success: bool, next: &Observation, agent: &AgentState) {
        assert!(!self.done, "episode already terminated");
        self.traj.actions.push(action.to_array().map(|v| v as f32));
        self.rewards.push(reward as f32);
        self.done = success;
        self.traj.push_obs(next, agent);
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn finish(self, goal: DVec3, radius: f64) -> Episode {
        let n = self.rewards.len();
        let mut dones = vec![false; n];
        if self.done {
            dones[n - 1] = true;
        }
        Episode {
            traj: Arc::new(self.traj),
            goal,
            rewards: self.rewards,
            dones,
            radius,
            relabeled: false,
        }
    }
}

/// A (possibly relabeled) episode: shared trajectory plus goal-specific
/// rewards and terminal flags. May cover only a prefix of the trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub traj: Arc<Trajectory>,
    pub goal: DVec3,
    pub rewards: Vec<f32>,
    pub dones: Vec<bool>,
    pub radius: f64,
    pub relabeled: bool,
}

impl Episode {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn success(&self) -> bool {
        self.dones.last().copied().unwrap_or(false)
    }

    pub fn total_reward(&self) -> f64 {
        self.rewards.iter().map(|&r| r as f64).sum()
    }

    /// Writes observation `k` for this episode's goal.
    pub fn write_obs<F: Real>(&self, k: usize, map: &MapDef, cfg: &ObsConfig, occ: &mut [F], depth: &mut [F], vec: &mut [F]) {
        let t = &*self.traj;
        let words = &t.occupancy[k * t.occ_words..(k + 1) * t.occ_words];
        for (i, o) in occ.iter_mut().enumerate() {
            *o = if words[i / 64] >> (i % 64) & 1 == 1 { F::one() } else { F::zero() };
        }
        for (d, &s) in depth.iter_mut().zip(&t.depth[k * t.depth_len..(k + 1) * t.depth_len]) {
            *d = F::of(s as f64);
        }
        let mut scalars = t.motion[k];
        scalars[6..9].copy_from_slice(&relative_goal(t.positions[k], t.yaws[k], self.goal, map));
        let abs = if cfg.no_abs_position {
            [0.0; ABS_DIM]
        } else {
            abs_positions(t.positions[k], self.goal, map)
        };
        for (v, &s) in vec.iter_mut().zip(scalars.iter().chain(&abs)) {
            *v = F::of(s as f64);
        }
    }

    /// Observation `k` as the environment would have produced it.
    pub fn observation(&self, k: usize, map: &MapDef, cfg: &ObsConfig) -> Observation {
        let mut occ = vec![0f32; cfg.occ_len()];
        let mut depth = vec![0f32; cfg.depth_len()];
        let mut vec = [0f32; VEC_DIM];
        self.write_obs(k, map, cfg, &mut occ, &mut depth, &mut vec);
        Observation {
            occupancy: occ,
            depth,
            scalars: vec[..SCALAR_DIM].try_into().unwrap(),
            abs_positions: vec[SCALAR_DIM..].try_into().unwrap(),
        }
    }
}

/// Number of windows of length `w` an episode of `len` steps offers.
pub fn window_count(len: usize, w: usize) -> usize {
    if len >= w {
        len - w + 1
    } else {
        1
    }
}

/// Minibatch of `b` windows, time-major (`row = t * b + i`).
///
/// A window covers `burn_in + len` steps and `burn_in + len + 1`
/// observations. Short episodes are padded at the front; `mask` is zero on
/// padded steps.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch<F> {
    pub b: usize,
    pub burn_in: usize,
    pub len: usize,
    pub obs: ObsBatch<F>,
    pub actions: Vec<F>,
    pub rewards: Vec<F>,
    pub dones: Vec<F>,
    pub mask: Vec<F>,
}

impl<F: Real> Batch<F> {
    pub fn window(&self) -> usize {
        self.burn_in + self.len
    }

    /// Observation rows for time steps `t0..t1`.
    pub fn obs_rows(&self, t0: usize, t1: usize) -> ObsBatch<F> {
        let (a, b) = (t0 * self.b, t1 * self.b);
        let occ = self.obs.occ.len() / self.obs.n;
        let depth = self.obs.depth.len() / self.obs.n;
        let vec = self.obs.vec.len() / self.obs.n;
        ObsBatch {
            n: b - a,
            occ: self.obs.occ[a * occ..b * occ].to_vec(),
            depth: self.obs.depth[a * depth..b * depth].to_vec(),
            vec: self.obs.vec[a * vec..b * vec].to_vec(),
        }
    }
}

/// Builds a batch from explicit `(episode, offset)` windows.
pub fn assemble<F: Real>(
    windows: &[(&Episode, usize)],
    burn_in: usize,
    len: usize,
    map: &MapDef,
    cfg: &ObsConfig,
) -> Batch<F> {
    let b = windows.len();
    let w = burn_in + len;
    let (ol, dl) = (cfg.occ_len(), cfg.depth_len());
    let rows = (w + 1) * b;
    let mut batch = Batch {
        b,
        burn_in,
        len,
        obs: ObsBatch {
            n: rows,
            occ: vec![F::zero(); rows * ol],
            depth: vec![F::zero(); rows * dl],
            vec: vec![F::zero(); rows * VEC_DIM],
        },
        actions: vec![F::zero(); w * b * 4],
        rewards: vec![F::zero(); w * b],
        dones: vec![F::zero(); w * b],
        mask: vec![F::zero(); w * b],
    };
    for (i, &(ep, offset)) in windows.iter().enumerate() {
        let n = ep.len();
        let pad = w.saturating_sub(n);
        assert!(offset + w - pad <= n, "window past the end of the episode");
        for t in pad..=w {
            let k = offset + t - pad;
            let r = t * b + i;
            let o = &mut batch.obs;
            ep.write_obs(
                k,
                map,
                cfg,
                &mut o.occ[r * ol..(r + 1) * ol],
                &mut o.depth[r * dl..(r + 1) * dl],
                &mut o.vec[r * VEC_DIM..(r + 1) * VEC_DIM],
            );
            if t < w {
                for (d, &s) in batch.actions[r * 4..r * 4 + 4].iter_mut().zip(&ep.traj.actions[k]) {
                    *d = F::of(s as f64);
                }
                batch.rewards[r] = F::of(ep.rewards[k] as f64);
                batch.dones[r] = if ep.dones[k] { F::one() } else { F::zero() };
                batch.mask[r] = F::one();
            }
        }
    }
    batch
}

/// FIFO of episodes bounded by total stored steps, sampled uniformly over
/// valid `(episode, offset)` windows.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    window: usize,
    episodes: VecDeque<Episode>,
    steps: usize,
    /// Cumulative window counts; rebuilt lazily.
    prefix: Vec<usize>,
    dirty: bool,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, window: usize) -> Self {
        assert!(window >= 1);
        Self {
            capacity,
            window,
            episodes: VecDeque::new(),
            steps: 0,
            prefix: Vec::new(),
            dirty: false,
        }
    }

    pub fn push(&mut self, ep: Episode) {
        assert!(!ep.is_empty(), "empty episode");
        self.steps += ep.len();
        self.episodes.push_back(ep);
        while self.steps > self.capacity {
            let old = self.episodes.pop_front().expect("nonempty");
            self.steps -= old.len();
        }
        self.dirty = true;
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn episodes(&self) -> usize {
        self.episodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.episodes.is_empty()
    }

    pub fn episode(&self, i: usize) -> &Episode {
        &self.episodes[i]
    }

    fn refresh(&mut self) {
        if !self.dirty {
            return;
        }
        self.prefix.clear();
        let mut acc = 0;
        for ep in &self.episodes {
            acc += window_count(ep.len(), self.window);
            self.prefix.push(acc);
        }
        self.dirty = false;
    }

    pub fn window_total(&mut self) -> usize {
        self.refresh();
        self.prefix.last().copied().unwrap_or(0)
    }

    /// Uniform draw over valid windows: `(episode index, offset)`.
    pub fn sample_index<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<(usize, usize), ReplayError> {
        let total = self.window_total();
        if total == 0 {
            return Err(ReplayError::Empty);
        }
        let u = rng.random_range(0..total);
        let e = self.prefix.partition_point(|&c| c <= u);
        let before = if e == 0 { 0 } else { self.prefix[e - 1] };
        Ok((e, u - before))
    }

    pub fn sample<F: Real, R: Rng + ?Sized>(
        &mut self,
        batch: usize,
        burn_in: usize,
        len: usize,
        map: &MapDef,
        cfg: &ObsConfig,
        rng: &mut R,
    ) -> Result<Batch<F>, ReplayError> {
        assert_eq!(burn_in + len, self.window, "window length differs from the buffer's");
        let picks = (0..batch)
            .map(|_| self.sample_index(rng))
            .collect::<Result<Vec<_>, _>>()?;
        let windows: Vec<(&Episode, usize)> = picks.iter().map(|&(e, o)| (&self.episodes[e], o)).collect();
        Ok(assemble(&windows, burn_in, len, map, cfg))
    }
}
