use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),

    #[error("unsupported Sobolev order s = {0} (supported range 0 <= s <= 3)")]
    UnsupportedNormOrder(f64),

    #[error("invalid model parameter: {0}")]
    InvalidParameter(String),

    #[error("profile touches the ground plate (min u = {min_u})")]
    Touchdown { min_u: f64 },

    #[error("linear solver failure: {0}")]
    SolverFailure(String),

    #[error("{what} did not converge after {iters} iterations (residual {residual:.3e})")]
    NoConvergence {
        what: String,
        iters: usize,
        residual: f64,
        /// Last iterate, used by pull-in bracketing to warm-start retries.
        last: Vec<f64>,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("quench before final time: {0}")]
    QuenchBeforeFinalTime(String),
}

pub type Result<T> = std::result::Result<T, Error>;
