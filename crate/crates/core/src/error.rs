use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum QfError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("degenerate matrix: {0}")]
    DegenerateMatrix(String),
    #[error("undefined value: {0}")]
    UndefinedValue(String),
    #[error("degenerate model: {0}")]
    DegenerateModel(String),
    #[error("degenerate feature: {0}")]
    DegenerateFeature(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, QfError>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(QfError::InvalidInput(msg.into()))
}
