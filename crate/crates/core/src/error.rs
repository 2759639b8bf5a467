use thiserror::Error;

use crate::corrector::DivergenceReport;

/// Everything that can go wrong while building or verifying a solution.
#[derive(Debug, Error)]
pub enum Error {
    #[error("potential assumption violated: {0}")]
    Assumption(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("grid: {0}")]
    Grid(String),

    #[error("shooting failed: {reason} (bracket history: {history:?})")]
    Shooting {
        reason: String,
        /// `(lo, hi)` amplitude brackets visited before the failure.
        history: Vec<(f64, f64)>,
    },

    #[error("linear solve did not converge in {iterations} iterations (relative residual {residual:e})")]
    LinearSolve { iterations: usize, residual: f64, history: Vec<f64> },

    #[error("degenerate constraint: quad(Z^2) = {0:e}")]
    DegenerateConstraint(f64),

    #[error("fixed point diverged at R = {} after {} iterations (last step ratio {:.3}): {}", .0.radius, .0.iterations, .0.last_ratio, .0.reason)]
    Diverged(Box<DivergenceReport>),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
