//! Error types shared across the crate.

use thiserror::Error;

/// Errors produced by model construction and evaluation.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value violates its documented invariant.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// Paired vectors (policy vs. sample set) disagree in length.
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    /// A per-sample functional evaluated to a non-finite value.
    #[error("non-finite value {value} at sample index {index}")]
    NonFiniteSample { index: usize, value: f64 },

    /// Total power consumption is zero, so energy efficiency is undefined.
    #[error("degenerate objective: total power consumption is zero")]
    DegenerateObjective,

    /// The per-sample power price is zero, so the stationarity root diverges.
    #[error("unbounded power: effective price is zero for a positive-mass branch")]
    UnboundedPower,

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// A malformed record in a sample-set CSV file.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
