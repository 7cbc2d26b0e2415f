//! Dense tensors with reverse-mode differentiation, a linear-chain CRF, and
//! the multi-task BiLSTM–attention–CRF tagger built on them.

pub mod crf;
pub mod error;
pub mod extract;
pub mod graph;
pub mod io;
pub mod model;
pub mod params;
pub mod tensor;
pub mod train;

pub use error::{NnError, Result};
pub use extract::{extract, predict_corpus, ExtractedEntity, ExtractionResult};
pub use io::{load_model, save_model};
pub use model::{ModelConfig, MultiTaskModel, TagSet, Vocab};
pub use params::OptimizerKind;
pub use tensor::Tensor;
pub use train::{train, train_model, TrainReport, TrainingConfig};
