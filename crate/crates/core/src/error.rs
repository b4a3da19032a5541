//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    /// The header row does not contain a required column.
    #[error("missing required column {0:?} in header")]
    MissingColumn(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    /// Churn of zero makes the lifetime-value formula singular (it divides
    /// average sales x purchase frequency by churn).
    #[error("churn is zero (every customer has repeat orders); the CLV formula divides by churn")]
    ZeroChurn,
}

pub type Result<T> = std::result::Result<T, Error>;
