//! Library side of the `navgym` binary.

pub mod commands;
pub mod config;
pub mod stats;

use navgym_core::navmesh::NavError;
use navgym_core::world::{GridError, MapError};
use navgym_sac::TrainError;

pub use config::{Ablation, RunConfig};

/// Exit code 2 for usage and config problems, 1 for everything else.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
            CliError::Runtime(e) => write!(f, "{e:#}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Config(m) => CliError::Usage(m),
            TrainError::Mismatch(m) => CliError::Usage(format!("network spec mismatch: {m}")),
            other => CliError::Runtime(other.into()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.into())
    }
}

impl From<GridError> for CliError {
    fn from(e: GridError) -> Self {
        CliError::Runtime(e.into())
    }
}

impl From<NavError> for CliError {
    fn from(e: NavError) -> Self {
        CliError::Runtime(e.into())
    }
}

impl From<MapError> for CliError {
    fn from(e: MapError) -> Self {
        CliError::Usage(e.to_string())
    }
}
