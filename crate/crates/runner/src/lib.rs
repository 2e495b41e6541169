//! Experiment orchestration: configuration loading, the episode loop with
//! novelty-triggered growth, metrics emission, snapshot persistence, and the
//! demonstration-programming front end.

pub mod config;
pub mod experiment;
pub mod metrics;
pub mod snapshot;

pub use config::ExperimentConfig;
pub use experiment::{resume_experiment, run_experiment, RunOutput};
pub use snapshot::{snapshot_load, snapshot_save, Snapshot};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error(transparent)]
    Core(#[from] ringlearn_core::CoreError),

    #[error("config error: {0}")]
    Config(String),

    #[error("snapshot error: {0}")]
    Snapshot(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl RunnerError {
    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        RunnerError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, RunnerError>;
