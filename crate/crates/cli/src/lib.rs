//! Library side of the experiment CLI: configuration ingestion and the
//! experiment runners, kept separate from argument parsing so integration
//! tests can drive them directly.

pub mod config;
pub mod experiments;

pub use config::{
    db_to_linear, linear_to_db, ExperimentConfig, ExperimentKind, Regime, SweepParam,
};
pub use experiments::{run_solve, run_sweep, run_validate_bound, RunOutput};

/// CLI-level errors. Configuration problems exit with a distinct code from
/// runtime failures so scripts can tell them apart.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(cogpower::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl From<cogpower::Error> for CliError {
    fn from(e: cogpower::Error) -> Self {
        match e {
            cogpower::Error::InvalidConfig(msg) => CliError::Config(msg),
            other => CliError::Core(other),
        }
    }
}
