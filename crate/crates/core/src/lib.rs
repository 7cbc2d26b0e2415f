//! Text-side machinery for unsupervised entity extraction from incident
//! reports: HTML cleaning and tokenization, pattern-based label
//! bootstrapping, data-type inference, corpus-wide label propagation,
//! NER evaluation and a synthetic incident generator.

pub mod bootstrap;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod propagation;
pub mod synth;
pub mod typing;

pub use error::{Error, Result};
