use num_complex::Complex64;
use thiserror::Error;

/// Errors produced by the numerical modules.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("model assumption violated: {0}")]
    ModelAssumption(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("eigensolver did not converge (residual norms: {residuals:?})")]
    EigenNonConvergence { residuals: Vec<f64> },

    #[error("degenerate kernel: {0}")]
    DegenerateKernel(String),

    #[error("no positive eigenvalue branch: {0}")]
    NoPositiveEigenvalue(String),

    #[error("Newton iteration diverged at K = {k}: last iterate {last}, residual {residual:e}")]
    NewtonDivergence {
        k: f64,
        last: Complex64,
        residual: f64,
    },

    #[error("non-finite state detected; last valid time t = {last_valid_time}")]
    NonFinite { last_valid_time: f64 },

    #[error("eigenfunction vanishes at grid nodes {nodes:?}; C(x) undefined there")]
    ZeroCrossing { nodes: Vec<usize> },

    #[error("degenerate fit window: {0}")]
    DegenerateWindow(String),

    #[error("quadrature failed to reach tolerance: estimated error {estimate:e}")]
    Quadrature { estimate: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
