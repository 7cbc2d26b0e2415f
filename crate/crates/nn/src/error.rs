use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("{op}: incompatible shapes {left:?} and {right:?}")]
    Shape {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("loss must be a scalar, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error("tag index {index} out of range for {k} tags")]
    InvalidTag { index: usize, k: usize },
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("invalid configuration: {0}")]
    Config(String),
    /// Wrong magic bytes or an unsupported format version.
    #[error("unsupported model file: {0}")]
    Version(String),
    #[error("model has not been trained")]
    Untrained,
    #[error(transparent)]
    Core(#[from] softner_core::Error),
    #[error("corrupt model file: {0}")]
    Format(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, NnError>;

impl NnError {
    pub(crate) fn shape(op: &'static str, left: &[usize], right: &[usize]) -> Self {
        NnError::Shape {
            op,
            left: left.to_vec(),
            right: right.to_vec(),
        }
    }
}
