//! Error type shared across the crate.

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Vector or matrix dimensions do not agree.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// An argument lies outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Invalid configuration or input data.
    #[error("invalid input: {0}")]
    Validation(String),

    /// A CSV row failed to parse or validate; `line` is 1-based and counts
    /// the header.
    #[error("csv error at line {line}: {message}")]
    Csv { line: usize, message: String },

    /// A numerical procedure broke down (NaN parameters, singular matrix, ...).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Every importance weight underflowed for one individual, so its
    /// likelihood contribution cannot be estimated.
    #[error("all importance weights underflowed for individual {id}")]
    WeightUnderflow { id: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
