use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed record at line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("duplicate incident id {0:?}")]
    DuplicateId(String),
    #[error("cannot classify an empty value")]
    EmptyValue,
    #[error("cannot resolve a data type from zero instances")]
    NoInstances,
    #[error("corpora differ in shape: {0}")]
    ShapeMismatch(String),
    #[error("empty catalog")]
    EmptyCatalog,
    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
