use thiserror::Error;

/// Errors raised by the shape-derivative library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("index error: {0}")]
    Index(String),

    #[error("non-finite integrand value {value} at node {index} ({x}, {y})")]
    NonFiniteIntegrand {
        index: usize,
        x: f64,
        y: f64,
        value: f64,
    },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("singularity: {0}")]
    Singular(String),

    #[error("deformation folds the domain: jacobian determinant {det:e} at ({x}, {y})")]
    Fold { x: f64, y: f64, det: f64 },

    #[error("no convergence after {iterations} iterations: {message}")]
    Convergence {
        iterations: usize,
        message: String,
        /// Last few iterate diagnostics (eigenvalue estimates or residual norms).
        trace: Vec<f64>,
    },

    #[error("solver failure: {message}")]
    Solver { message: String, damping: Vec<f64> },

    #[error("degenerate trajectory: {0}")]
    DegenerateTrajectory(String),
}

pub type Result<T> = std::result::Result<T, Error>;
