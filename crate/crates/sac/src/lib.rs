//! Recurrent Soft Actor-Critic for the navgym simulator: squashed-Gaussian
//! policy, twin Q heads with Polyak targets, learned temperature, windowed
//! sequence replay with burn-in, hindsight relabeling and a curriculum-driven
//! training loop.

pub mod agent;
pub mod config;
pub mod her;
pub mod policy;
pub mod replay;
pub mod train;

pub use agent::{Networks, SacState, UpdateError, UpdateStats};
pub use config::{CurriculumConfig, HerStrategy, SacConfig};
pub use replay::{Batch, Episode, EpisodeBuilder, ReplayBuffer};
pub use train::{TrainConfig, TrainError, Trainer};
