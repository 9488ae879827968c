use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("invalid allocation: {0}")]
    InvalidAllocation(String),
    #[error("invalid action: {0}")]
    InvalidAction(String),
    #[error("normalization undefined: {0}")]
    Normalization(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("instance too large for exhaustive search: {0} allocations")]
    TooLarge(f64),
    #[error("{0}")]
    Training(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Whether the error stems from user-supplied configuration rather than a runtime failure.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::TooLarge(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
