//! Crate-wide error type. Variants mirror the failure classes the public
//! operations can hit: shape mismatches, bad parameters, malformed files,
//! unknown entities, and non-finite arithmetic.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Operands disagree on length or shape.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A scalar argument is outside its admissible range.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// Input data violates a structural requirement (empty split, missing
    /// truth labels, non-binary truth, ...).
    #[error("invalid data: {0}")]
    Data(String),

    /// A configuration combination is unusable (missing auxiliary model,
    /// missing relation matrix, unknown method id, ...).
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Text input failed to parse; `line` is 1-based.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// An entity or class name is not known to the receiver.
    #[error("unknown name: {0}")]
    Lookup(String),

    /// Arithmetic produced or received a non-finite value.
    #[error("numeric error: {0}")]
    Numeric(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
