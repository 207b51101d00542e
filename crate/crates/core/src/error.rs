use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The thinning envelope was below ψ at a proposed point.
    #[error("psi bound violated at x = {x}: value {value} exceeds bound {bound}")]
    BoundViolation { x: f64, value: f64, bound: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate path: {0}")]
    DegeneratePath(String),

    #[error("stopping time not reached before time cap {cap}")]
    Timeout { cap: f64 },

    #[error("missing thresholds: {0}")]
    MissingThresholds(String),

    #[error("schema error in {source_name}: {message}")]
    Schema { source_name: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
