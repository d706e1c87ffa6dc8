//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("dimension mismatch: expected {expected}, got {got} ({what})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid algorithm parameters: {0}")]
    InvalidAlgorithm(String),

    #[error("rate vector touches a divergent boundary: x[{route}] = 0")]
    BoundaryRate { route: usize },

    #[error("non-finite marginal price on route {route} at an interior point")]
    NonFiniteMarginal { route: usize },

    #[error("zero decrement: window-to-fluid conversion undefined")]
    ZeroDecrement,

    #[error("invalid run configuration: {0}")]
    InvalidConfig(String),

    #[error("fluid trajectory diverged at t = {t:.6}: |x|_inf = {norm:.3e}")]
    Diverged { t: f64, norm: f64 },

    #[error("solver domain error: {0}")]
    Domain(String),

    #[error("solver failed to converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("equilibrium residual {residual:.3e} exceeds tolerance {tol:.3e}")]
    NotAnEquilibrium { residual: f64, tol: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("unknown experiment '{0}'")]
    UnknownExperiment(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
