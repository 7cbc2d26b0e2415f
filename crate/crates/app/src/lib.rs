//! Pipeline orchestration, run manifests and the extraction service behind
//! the `softner` command.

pub mod manifest;
pub mod pipeline;
pub mod server;

pub use manifest::{sha256_file, PipelineRunManifest};
pub use pipeline::{extract_response, run_all, ExtractResponse, RunConfig, SCHEMA_VERSION};
