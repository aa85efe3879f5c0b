//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside the mathematical domain of an operation
    /// (e.g. `h` larger than the dataset, a draw count exceeding the
    /// population).
    #[error("domain error: {0}")]
    Domain(String),

    /// Input data has inconsistent dimensions.
    #[error("shape error: {0}")]
    Shape(String),

    /// A supplied distance matrix violates its invariants; the message
    /// names the offending indices.
    #[error("validation error: {0}")]
    Validation(String),

    /// A text input could not be parsed; `line` is 1-based.
    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// An internal invariant was violated; indicates a bug, not bad input.
    #[error("internal invariant violated: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;
