use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// Invalid experiment or parameter configuration. The message names the
    /// violated constraint.
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),

    #[error("iterative filtering diverged: active set {active} fell below {required}")]
    FilterDiverged { active: usize, required: usize },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("toml error: {0}")]
    Toml(#[from] toml::de::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    /// Short machine-readable tag used in CLI error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } | Error::Config(_) | Error::Toml(_) => "validation",
            Error::Usage(_) => "usage",
            Error::NonFinite(_) => "non_finite",
            Error::FilterDiverged { .. } => "filter_diverged",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}
