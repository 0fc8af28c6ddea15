use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("mode {mode} out of range for an order-{order} tensor")]
    ModeOutOfRange { mode: usize, order: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("rank {rank} out of range for mode {mode} (allowed 1..={max})")]
    RankOutOfRange { mode: usize, rank: usize, max: usize },

    #[error("reference tensor has zero Frobenius norm")]
    ZeroNormReference,

    #[error("domain violation: {0}")]
    Domain(String),

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("degenerate factor: {0}")]
    DegenerateFactor(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error("config error on line {line}: {reason}")]
    Config { line: usize, reason: String },

    #[error("trial failed (ratio {ratio}, trial {trial}, seed {seed:#018x}): {source}")]
    Trial {
        ratio: f64,
        trial: usize,
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
