//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    /// Input data violates a dataset invariant (bad cell, duplicate id, ...).
    #[error("invalid data: {0}")]
    InvalidData(String),

    /// A caller-supplied argument is out of its documented range.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// Pearson correlation is undefined for constant vectors.
    #[error("constant input vector: {0}")]
    ConstantInput(String),

    /// Cosine similarity is undefined for (weighted) zero-norm vectors.
    #[error("zero-norm vector: {0}")]
    ZeroNorm(String),

    #[error("missing target for problem '{0}'")]
    MissingTarget(String),

    /// A LOPO fold aborted; fold failures are fatal for the whole run so
    /// that aggregate errors stay comparable across variants.
    #[error("fold '{fold}' failed: {source}")]
    FoldFailed {
        fold: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn invalid_data(msg: impl Into<String>) -> Self {
        Error::InvalidData(msg.into())
    }

    pub fn invalid_argument(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
