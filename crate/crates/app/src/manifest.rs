//! Run manifest: what each stage was configured with, what it read and
//! wrote, how long it took, and content hashes of everything it produced.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Duration;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StageRecord {
    pub stage: String,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PipelineRunManifest {
    pub tool_version: String,
    pub stages: Vec<StageRecord>,
    /// Path → sha256 (hex) of every produced artifact.
    pub artifacts: BTreeMap<String, String>,
}

pub fn sha256_file(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).with_context(|| format!("hashing {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

impl PipelineRunManifest {
    pub fn new() -> Self {
        Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            ..Self::default()
        }
    }

    /// Existing manifest at `path`, or a fresh one.
    pub fn load_or_new(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.exists() {
            return Ok(Self::new());
        }
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing manifest {}", path.display()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(path, json + "\n").with_context(|| format!("writing {}", path.display()))
    }

    /// Record one stage; every output is hashed. A re-run stage replaces the
    /// earlier record of the same name.
    pub fn record(
        &mut self,
        stage: &str,
        config: &impl Serialize,
        seed: Option<u64>,
        inputs: &[&Path],
        outputs: &[&Path],
        elapsed: Duration,
    ) -> Result<()> {
        let show = |p: &&Path| p.display().to_string();
        for p in outputs {
            self.artifacts.insert(show(p), sha256_file(p)?);
        }
        self.stages.retain(|s| s.stage != stage);
        self.stages.push(StageRecord {
            stage: stage.to_string(),
            config: serde_json::to_value(config)?,
            seed,
            inputs: inputs.iter().map(show).collect(),
            outputs: outputs.iter().map(show).collect(),
            seconds: elapsed.as_secs_f64(),
        });
        Ok(())
    }
}
