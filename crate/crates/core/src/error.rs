use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input file content.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// Inconsistent configuration (metadata mismatch, missing reference, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// An argument violates an operation's preconditions.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// Operation applied to a value in the wrong state (e.g. unit already physical).
    #[error("invalid state: {0}")]
    InvalidState(String),

    /// Not enough data to produce a meaningful result.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// Numerical failure (defective matrix, no convergence, ...).
    #[error("numerical error: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
