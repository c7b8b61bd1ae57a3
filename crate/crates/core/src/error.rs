use thiserror::Error;

/// Errors raised by field evaluation, quadrature and the inversion pipeline.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    Dimension(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("point {point:?} lies outside the half-space y_n > 0")]
    OutsideHalfSpace { point: Vec<f64> },

    #[error("sphere profile evaluated at non-positive radius r = {r}")]
    NonPositiveRadius { r: f64 },

    #[error("domain mismatch: {0}")]
    DomainMismatch(String),

    #[error("non-finite integrand value at node {node:?}")]
    NonFinite { node: Vec<f64> },

    #[error("epsilon extrapolation did not converge; (eps, value) table: {table:?}")]
    Extrapolation { table: Vec<(f64, f64)> },

    #[error("non-convergence: {0}")]
    NonConvergence(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
