//! Error type shared across the library.

/// Library-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("point outside problem domain: {0}")]
    OutOfDomain(String),

    #[error("invalid kernel parameter: {0}")]
    InvalidParameter(String),

    #[error("Gram matrix could not be factorized, jitter escalated up to {jitter:.3e}")]
    IllConditioned { jitter: f64 },

    #[error("model fit failed: {0}")]
    FitFailed(String),

    #[error("optimizer failed: {0}")]
    OptimizerFailed(String),

    #[error("operation not supported in this model mode: {0}")]
    UnsupportedMode(&'static str),

    #[error("unknown problem id `{0}`")]
    UnknownProblem(String),

    #[error("unknown algorithm id `{0}`")]
    UnknownAlgorithm(String),

    #[error("result store is empty or has no runs for the requested key")]
    EmptyStore,

    #[error("run aborted after {evaluations} evaluations: {reason}")]
    Aborted { evaluations: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
