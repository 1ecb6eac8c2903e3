use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QcError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    /// A jet operation was asked to leave its domain (division by zero,
    /// real power or logarithm of a non-positive value).
    #[error("domain error in {op}: value {value}")]
    Domain { op: &'static str, value: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("input tensor is not symmetric (max asymmetry {0})")]
    NotSymmetric(f64),

    #[error("quadrature did not converge: {0}")]
    NoConvergence(String),
}

pub type Result<T> = std::result::Result<T, QcError>;
