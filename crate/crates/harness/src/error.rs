use std::path::PathBuf;

use neograd::mlp::DatasetError;
use neograd::rho::RhoError;
use neograd::{CostError, OptimError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{0}")]
    Usage(String),
    #[error("config line {line}: {msg}")]
    Spec { line: usize, msg: String },
    #[error("dataset not found: {}", .0.display())]
    MissingDataset(PathBuf),
    #[error("dataset: {0}")]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Optim(#[from] OptimError),
    #[error(transparent)]
    Rho(#[from] RhoError),
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error("no stable α in grid")]
    NoStableAlpha,
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{}: {msg}", path.display())]
    Parse { path: PathBuf, msg: String },
    #[error("{0}")]
    Experiment(String),
}

impl HarnessError {
    /// Process exit code: 1 usage, 2 experiment failure, 3 missing dataset.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Usage(_) | HarnessError::Spec { .. } => 1,
            HarnessError::MissingDataset(_) => 3,
            _ => 2,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Self {
        let path = path.into();
        move |source| HarnessError::Io { path, source }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>) -> impl FnOnce(csv::Error) -> Self {
        let path = path.into();
        move |source| HarnessError::Csv { path, source }
    }
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;
