use thiserror::Error;

#[derive(Debug, Error)]
pub enum TriageError {
    #[error("unknown feature mode {0:?} (expected TITLE_DESCRIPTION, ENTITIES or ENTITIES_TITLE)")]
    UnknownMode(String),
    #[error("empty {0}")]
    Empty(&'static str),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, TriageError>;
