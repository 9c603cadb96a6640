use navgym_core::sim::CurriculumState;
use navgym_core::world::MapDef;
use navgym_nn::AdamConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HerStrategy {
    Final,
    Future,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SacConfig {
    pub gamma: f64,
    /// Polyak coefficient for the target networks.
    pub tau: f64,
    pub initial_alpha: f64,
    /// Defaults to minus the action dimension.
    pub target_entropy: Option<f64>,
    pub adam: AdamConfig,
    /// Windows per minibatch.
    pub batch_size: usize,
    pub burn_in: usize,
    pub train_len: usize,
    /// Replay capacity in stored steps.
    pub replay_capacity: usize,
    /// Environment steps between update rounds.
    pub env_steps_per_update: usize,
    /// Gradient updates per round.
    pub updates_per_round: usize,
    /// Uniform random actions and no updates before this many steps.
    pub learning_starts: u64,
    pub twin_critics: bool,
    pub her: Option<HerStrategy>,
    /// Relabeled copies added per finished episode.
    pub her_relabels: usize,
}

impl Default for SacConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            tau: 0.005,
            initial_alpha: 0.05,
            target_entropy: None,
            adam: AdamConfig::default(),
            batch_size: 16,
            burn_in: 8,
            train_len: 24,
            replay_capacity: 200_000,
            env_steps_per_update: 4,
            updates_per_round: 1,
            learning_starts: 2_000,
            twin_critics: true,
            her: None,
            her_relabels: 1,
        }
    }
}

impl SacConfig {
    pub fn window(&self) -> usize {
        self.burn_in + self.train_len
    }

    pub fn target_entropy(&self, action_dim: usize) -> f64 {
        self.target_entropy.unwrap_or(-(action_dim as f64))
    }

    pub fn validate(&self) -> Result<(), String> {
        let mut errs = Vec::new();
        if !(0.0..=1.0).contains(&self.gamma) {
            errs.push("sac.gamma must be in [0, 1]".to_string());
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            errs.push("sac.tau must be in (0, 1]".into());
        }
        if !(self.initial_alpha > 0.0 && self.initial_alpha.is_finite()) {
            errs.push("sac.initial_alpha must be > 0".into());
        }
        if !(self.adam.lr > 0.0) {
            errs.push("sac.adam.lr must be > 0".into());
        }
        for (name, v) in [
            ("batch_size", self.batch_size),
            ("train_len", self.train_len),
            ("replay_capacity", self.replay_capacity),
            ("env_steps_per_update", self.env_steps_per_update),
            ("updates_per_round", self.updates_per_round),
        ] {
            if v == 0 {
                errs.push(format!("sac.{name} must be >= 1"));
            }
        }
        if self.replay_capacity < self.window() {
            errs.push("sac.replay_capacity must hold at least one window".into());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(errs.join("; "))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurriculumConfig {
    /// `false` starts and stays at the final radius.
    pub enabled: bool,
    pub initial_radius: f64,
    pub radius_step: f64,
    /// Defaults to the horizontal diagonal of the map bounds.
    pub radius_max: Option<f64>,
    pub window: usize,
    pub threshold: f64,
}

impl Default for CurriculumConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            initial_radius: 5.0,
            radius_step: 5.0,
            radius_max: None,
            window: 50,
            threshold: 0.8,
        }
    }
}

impl CurriculumConfig {
    pub fn radius_max(&self, map: &MapDef) -> f64 {
        self.radius_max.unwrap_or_else(|| {
            let e = map.bounds.max - map.bounds.min;
            e.x.hypot(e.z)
        })
    }

    pub fn state(&self, map: &MapDef) -> CurriculumState {
        let max = self.radius_max(map);
        if self.enabled {
            CurriculumState::new(self.initial_radius.min(max), self.radius_step, max, self.window, self.threshold)
        } else {
            CurriculumState::fixed(max, self.window, self.threshold)
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let mut errs = Vec::new();
        if !(self.initial_radius > 0.0) {
            errs.push("curriculum.initial_radius must be > 0".to_string());
        }
        if !(self.radius_step >= 0.0) {
            errs.push("curriculum.radius_step must be >= 0".into());
        }
        if let Some(m) = self.radius_max {
            if !(m > 0.0) {
                errs.push("curriculum.radius_max must be > 0".into());
            }
        }
        if self.window == 0 {
            errs.push("curriculum.window must be >= 1".into());
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            errs.push("curriculum.threshold must be in (0, 1)".into());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(errs.join("; "))
        }
    }
}
