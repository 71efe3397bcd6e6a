use thiserror::Error;

/// Errors produced by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("length mismatch: expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("operation not available in regime {regime}: {reason}")]
    WrongRegime { regime: String, reason: String },

    #[error("multiplier undefined for component {component}: zero mass")]
    ZeroMass { component: usize },

    #[error("iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("shooting bracket not found: {0}")]
    Bracket(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
