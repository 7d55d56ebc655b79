use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("instance definition error: {0}")]
    InstanceDefinition(String),

    #[error("empty image after clipping at x = {x:?}")]
    EmptyImage { x: Vec<f64> },

    #[error("image contains no grid point at x = {x:?}")]
    DegenerateImage { x: Vec<f64> },

    #[error("parse error at position {position}: {message}")]
    Parse { position: usize, message: String },

    #[error("spec schema error: {0}")]
    Schema(String),

    #[error("scalar kind mismatch: {0}")]
    KindMismatch(String),

    #[error("non-finite value produced by {0}")]
    NonFinite(String),

    #[error("instance generator failed: {0}")]
    Generator(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn argument(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn instance(msg: impl Into<String>) -> Self {
        Error::InstanceDefinition(msg.into())
    }

    pub(crate) fn parse(position: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            position,
            message: message.into(),
        }
    }
}
