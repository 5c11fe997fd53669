use thiserror::Error;

/// Errors raised across the prediction pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// A network specification breaks one or more of its invariants.
    #[error("invalid network specification: {}", .0.join("; "))]
    Spec(Vec<String>),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A forward cache does not belong to the model it is used with.
    #[error("stale or mismatched state: {0}")]
    State(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// Training diverged or produced non-finite values.
    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("tuning failed: {0}")]
    Tuning(String),

    /// A predictor returned output that violates the simulator contract.
    #[error("contract violation: {0}")]
    Contract(String),

    /// Malformed artifact (record, checkpoint, report) read from disk.
    #[error("malformed data in {path}: {reason}")]
    Data { path: String, reason: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit status: 1 usage or configuration, 2 data, 3 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Spec(_) | Error::Argument(_) => 1,
            Error::Numeric(_) | Error::Tuning(_) | Error::State(_) => 3,
            _ => 2,
        }
    }

    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    pub(crate) fn data(path: impl AsRef<std::path::Path>, reason: impl Into<String>) -> Self {
        Error::Data {
            path: path.as_ref().display().to_string(),
            reason: reason.into(),
        }
    }
}
