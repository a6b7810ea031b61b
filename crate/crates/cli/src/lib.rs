//! Experiment harness behind the `pgs2s` binary: series generation,
//! training runs, checkpoint evaluation, regime comparison and the
//! selection-percentage plots.

pub mod commands;
pub mod experiment;
pub mod plot;
pub mod report;
pub mod spec;

use std::path::PathBuf;

use pgs2s::data::DataError;
use pgs2s::trainer::TrainError;
use thiserror::Error;

pub use spec::{DatasetRef, ExperimentSpec, PoolSpec};

/// Environment variable naming the directory that relative run outputs are
/// placed under.
pub const RUN_ROOT_ENV: &str = "PGS2S_RUN_ROOT";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config key `{key}`: {message}")]
    Config { key: String, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("nothing to plot: {0} holds no rounds")]
    NothingToPlot(PathBuf),
    #[error("{failed} of {total} runs failed")]
    RunsFailed { failed: usize, total: usize },
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Train(TrainError),
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Config { key, message } => CliError::Config { key, message },
            TrainError::Data(d) => CliError::Data(d),
            other => CliError::Train(other),
        }
    }
}

impl CliError {
    /// 2 for numeric or training failures, 1 for everything the user can fix
    /// by changing input.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Train(e) if e.is_numeric() => 2,
            CliError::Train(TrainError::Checkpoint(_)) => 1,
            CliError::Train(TrainError::SearchExhausted { .. }) => 2,
            CliError::Train(TrainError::Round { .. } | TrainError::Epoch { .. }) => 2,
            CliError::Data(DataError::Divergence { .. }) => 2,
            CliError::RunsFailed { .. } => 2,
            _ => 1,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }
}

/// Resolves a run output directory: relative paths go under
/// `$PGS2S_RUN_ROOT` when it is set.
pub fn resolve_output(path: &std::path::Path) -> PathBuf {
    if path.is_absolute() {
        return path.to_path_buf();
    }
    match std::env::var_os(RUN_ROOT_ENV) {
        Some(root) if !root.is_empty() => PathBuf::from(root).join(path),
        _ => path.to_path_buf(),
    }
}
