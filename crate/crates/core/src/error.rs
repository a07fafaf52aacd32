use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid vector: {0}")]
    InvalidVector(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("map produced a nonpositive or non-finite value in coordinate {coord}")]
    NonPositiveOutput { coord: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("map is not differentiable at this point (tie in coordinate {coord})")]
    NotDifferentiable { coord: usize },

    #[error("restriction to the given coordinates does not preserve the open orthant")]
    NotInteriorPreserving,

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("QR iteration did not converge; {} eigenvalues found before giving up", found.len())]
    EigenNoConvergence { found: Vec<f64> },

    #[error("iteration did not converge after {iterations} steps{}", period.map(|p| format!(" (periodic orbit, period {p})")).unwrap_or_default())]
    NotConverged { iterations: usize, period: Option<usize> },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
