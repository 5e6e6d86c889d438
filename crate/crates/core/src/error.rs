use thiserror::Error;

/// Errors shared across the solver stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error("time grid needs a positive final time and at least 2 intervals (got t_final = {t_final}, intervals = {intervals})")]
    InvalidGrid { t_final: f64, intervals: usize },

    #[error("dimension mismatch: expected {expected} components, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("fields live on different time grids")]
    GridMismatch,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("operation requires positive viscosity (got {0})")]
    ZeroViscosity(f64),

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("control must vanish at the first node (got {0})")]
    NonzeroInitialControl(f64),

    #[error("line search found no acceptable step after {0} reductions")]
    LineSearch(usize),
}

pub type Result<T> = std::result::Result<T, Error>;
