use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed relay configuration or inconsistent event log.
    #[error("structural error: {0}")]
    Structural(String),
    /// Argument outside the admissible domain.
    #[error("domain error: {0}")]
    Domain(String),
    /// Series would need more terms than the policy allows.
    #[error("truncation error: {needed} terms needed, max_terms = {max_terms}")]
    Truncation { needed: usize, max_terms: usize },
    #[error("integration error: {0}")]
    Integration(String),
    #[error("invalid initial data: {0}")]
    InitialData(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("sequence construction failed at index {index}: {reason}")]
    Construction { index: usize, reason: String },
    #[error("scenario mismatch: {0}")]
    ScenarioMismatch(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
