use thiserror::Error;

/// Errors raised anywhere in the solver stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("index {index} out of range (len {len})")]
    Index { index: usize, len: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{what} did not converge (last error estimate {estimate:e})")]
    Convergence { what: &'static str, estimate: f64 },

    #[error("trajectory diverged at step {step}")]
    Divergence { step: usize },

    #[error("linear solver failure: {0}")]
    Solver(String),

    #[error("noise mode ({i}, {j}) is undefined for this spectrum")]
    UndefinedMode { i: usize, j: usize },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
