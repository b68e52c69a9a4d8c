use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Shapes, sizes or hyperparameters that cannot describe a valid run.
    #[error("configuration error: {0}")]
    Config(String),

    /// An API was called with arguments outside its contract.
    #[error("usage error: {0}")]
    Usage(String),

    /// Numerical failure during training (non-finite values and the like).
    #[error("training error: {0}")]
    Training(String),

    /// An oracle check found a violation.
    #[error("check failed: {0}")]
    CheckFailed(String),

    #[error("missing file {}", .0.display())]
    MissingFile(PathBuf),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub(crate) fn check_failed(msg: impl Into<String>) -> Self {
        Error::CheckFailed(msg.into())
    }

    pub(crate) fn training(msg: impl Into<String>) -> Self {
        Error::Training(msg.into())
    }
}
