use thiserror::Error;

use crate::ground_state::GroundStateResult;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value in field ({context})")]
    NonFinite { context: &'static str },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid model parameters: {0}")]
    InvalidParams(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("grid mismatch between fields")]
    GridMismatch,

    #[error("rescaled field does not fit in the box ({lost_fraction:.3e} of the mass would leave it)")]
    SupportOverflow { lost_fraction: f64 },

    #[error("ratio undefined for the zero field")]
    UndefinedRatio,

    #[error("solver diverged at iteration {iteration}: stabilizing factor {factor:e}")]
    SolverDiverged {
        iteration: usize,
        factor: f64,
        trace: Vec<f64>,
    },

    #[error("solver did not converge in {iterations} iterations (residual {residual:e})")]
    NotConverged {
        iterations: usize,
        residual: f64,
        best: Box<GroundStateResult>,
    },

    #[error("quadrature tolerance not reached: estimate {estimate:e}, error bound {bound:e}")]
    Accuracy { estimate: f64, bound: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("snapshot format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
