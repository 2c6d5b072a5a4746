use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("range error: {0}")]
    Range(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A caller violated an operation's precondition (shape, kind, rate...).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("invalid architecture spec: {0}")]
    Spec(String),

    #[error("unknown registry entry `{0}`")]
    Registry(String),

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error(
        "non-finite loss at epoch {epoch}, batch {batch}: kl={kl}, reg={reg}"
    )]
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        kl: f64,
        reg: f64,
    },

    #[error("format error in {path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Wav(#[from] hound::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }
}
