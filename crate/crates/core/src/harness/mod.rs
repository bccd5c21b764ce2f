//! Config-driven experiment runner: turns a JSON config into CSV data files
//! and a checksummed manifest.

pub mod config;
pub mod output;
pub mod run;
pub mod sweep;
pub mod validation;

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::error::LatticeError;

pub use config::{validate_config, validate_config_for, ConfigError, ExperimentConfig, ExperimentKind};
pub use output::RunManifest;
pub use run::{run_experiment, run_experiment_in, RunStatus};
pub use sweep::{parse_sweep, run_sweep, SweepReport};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{0}")]
    Config(#[from] ConfigError),

    #[error(transparent)]
    Lattice(#[from] LatticeError),

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

impl HarnessError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        HarnessError::Io { path: path.to_path_buf(), source }
    }
}
