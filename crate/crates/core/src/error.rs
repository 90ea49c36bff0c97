use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid {family} natural parameter: {reason}")]
    InvalidParameter { family: &'static str, reason: String },

    #[error("{function} is only defined for positive arguments, got {x}")]
    Domain { function: &'static str, x: f64 },

    #[error("invalid truncation: {0}")]
    Truncation(String),

    #[error("non-finite value in input row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite value encountered during sweep {sweep}")]
    NanDetected { sweep: usize },

    #[error("rank-deficient design: {0}")]
    RankDeficient(String),

    #[error("basis mismatch: {0}")]
    SpecMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("malformed data: {0}")]
    Data(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
