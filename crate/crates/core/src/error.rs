use thiserror::Error;

/// Errors shared across the library.
#[derive(Error, Debug)]
pub enum Error {
    /// A precondition on an argument was violated.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Shapes of two values that must agree do not.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// An iterative solve stopped without meeting its tolerance.
    #[error("{context} did not converge (residual {residual:.3e})")]
    NonConvergence { context: &'static str, residual: f64 },

    /// A graph failed a structural requirement.
    #[error("graph error: {0}")]
    Graph(String),

    /// An enumeration guard tripped.
    #[error("instance too large: {0}")]
    InstanceTooLarge(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn dims(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }
}
