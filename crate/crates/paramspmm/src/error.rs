//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by matrix I/O, format construction, and the decider.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input file; `line` is 1-based.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// A parameter is outside its valid domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// An operand shape does not match the operation.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A configuration violates the parameter domain for its inputs.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// A metric has no defined value for this input (e.g. an empty matrix).
    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    /// A binary or CSV file does not decode as the expected layout.
    #[error("format error: {0}")]
    Format(String),

    /// Model and feature vector were produced under different schema versions.
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    /// A training table with no rows.
    #[error("empty training table")]
    EmptyTable,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
