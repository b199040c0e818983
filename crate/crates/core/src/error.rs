//! Crate-wide error type.

/// Errors produced by construction, validation, estimation, and serialization.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid probability vector: {reason}")]
    InvalidDistribution { reason: String },

    #[error("parameter {name} = {value} out of range; expected {expected}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("invalid measurement record {label:?}: {reason}")]
    InvalidRecord { label: String, reason: String },

    #[error("mismatched lengths ({context}): {left} vs {right}")]
    LengthMismatch {
        context: &'static str,
        left: usize,
        right: usize,
    },

    #[error("calibration failed for {label:?}: no-click rate {rate} not in (0, 1]")]
    Calibration { label: String, rate: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("malformed input at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
