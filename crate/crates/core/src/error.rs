//! Error types shared across the solver modules.

use thiserror::Error;

/// Errors raised by the numerical modules.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside the mathematical domain of the operation
    /// (e.g. a backward time interval, a nonpositive discount rate).
    #[error("domain error: {0}")]
    Domain(String),

    /// A formula is singular at the supplied parameters (e.g. a stationary
    /// level with `sigma = 0` or a firm limit with `lambda = 0`).
    #[error("degenerate parameters: {0}")]
    Degenerate(String),

    /// The Riccati integration did not reach the requested tolerance.
    #[error("no convergence after {steps} steps (residual {residual:e})")]
    NonConvergence { steps: u64, residual: f64 },

    /// A polished Riccati solution lost positive definiteness. Signals a
    /// solver bug rather than bad input.
    #[error("solution not positive definite: {0}")]
    NotPositiveDefinite(String),

    /// A calibration target could not be bracketed.
    #[error("calibration failed: {0}")]
    Calibration(String),

    /// The model parameters violate one or more invariants.
    #[error("invalid parameters: {0}")]
    Validation(String),

    /// Config file could not be parsed.
    #[error("config error: {0}")]
    Config(String),

    /// Underlying I/O failure.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
