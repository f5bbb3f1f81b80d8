use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("non-finite value {value} at input {index}; state normalization is corrupt")]
    NonFiniteInput { index: usize, value: f64 },

    #[error("expected {expected} values, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("action {action} out of range for an environment with {count} actions")]
    InvalidAction { action: usize, count: usize },

    #[error("kernel parameter theta must be positive, got {0}")]
    NonPositiveTheta(f64),

    #[error("correlation matrix not positive definite even with nugget {nugget:e}")]
    FitFailure { nugget: f64 },

    #[error("model input rejected: {0}")]
    ModelInput(String),

    #[error("archive is empty; the input strategy needs evaluated traces")]
    EmptyArchive,

    #[error("reference traces unavailable: {0}")]
    MissingReference(String),

    #[error("statistics undefined: {0}")]
    Statistics(String),

    #[error("malformed {what}: {detail}")]
    Parse { what: &'static str, detail: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
