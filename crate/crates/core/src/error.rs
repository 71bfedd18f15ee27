use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("too few observations: need at least {needed}, got {got}")]
    TooFewObservations { needed: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown feature `{0}`")]
    UnknownFeature(String),

    #[error("duplicate feature `{0}`")]
    DuplicateFeature(String),

    #[error("column `{0}` has no observed values")]
    FullyMissing(String),

    #[error("covariance matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("cache was produced by a different parameter version ({cache} != {params})")]
    StaleCache { cache: u64, params: u64 },

    #[error("training diverged at epoch {epoch}: {component} loss is not finite")]
    Diverged { epoch: usize, component: String },

    #[error("conflicting pair: {0}")]
    Conflict(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
