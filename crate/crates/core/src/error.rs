use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Grid or matrix dimensions that do not fit 4-byte signed indices.
    #[error("sizing error: {0}")]
    Sizing(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    /// More distinct values than the configured value-table limit.
    #[error("value table overflow: {distinct} distinct values exceed the limit of {limit}")]
    TableOverflow { distinct: usize, limit: usize },

    #[error("pattern table overflow: {0} distinct patterns")]
    PatternOverflow(usize),

    /// A compressed structure violates its own invariants.
    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("singular matrix: zero diagonal on row {row}")]
    Singular { row: usize },

    #[error("CG diverged at iteration {iteration}: non-finite {quantity}")]
    Divergence { iteration: usize, quantity: &'static str },

    #[error("verification failed: {0}")]
    Verification(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub(crate) fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::LengthMismatch { expected, actual });
    }
    Ok(())
}
