use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// The first operand is not supported on the second one.
    #[error("support violation: {0}")]
    SupportViolation(String),
    #[error("model construction: {0}")]
    ModelConstruction(String),
    #[error("solver backend: {0}")]
    Backend(String),
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
