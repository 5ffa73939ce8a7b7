use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::artifacts::MANIFEST;
use crate::config::PipelineConfig;
use crate::error::{CliError, Result};
use crate::pipeline::{Stage, StageOutput};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    /// Path relative to the output directory.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

/// What a run did: config identity, seed, timings, fallbacks and outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub config_version: u32,
    pub config_hash: String,
    pub seed: u64,
    pub stages: Vec<StageTiming>,
    pub warnings: Vec<String>,
    pub outputs: Vec<OutputFile>,
}

impl RunManifest {
    pub fn new(cfg: &PipelineConfig) -> Self {
        Self {
            tool_version: env!("CARGO_PKG_VERSION").into(),
            config_version: cfg.config_version,
            config_hash: cfg.config_hash.clone(),
            seed: cfg.seed,
            stages: Vec::new(),
            warnings: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub(crate) fn record(&mut self, stage: Stage, seconds: f64, output: StageOutput, out: &Path) -> Result<()> {
        self.stages.push(StageTiming { stage: stage.name().into(), seconds });
        self.warnings.extend(output.warnings);
        for file in output.files {
            let bytes = fs::read(&file).map_err(CliError::io(&file))?;
            let rel = file.strip_prefix(out).unwrap_or(&file).to_string_lossy().into_owned();
            self.outputs.retain(|o| o.path != rel);
            self.outputs.push(OutputFile { path: rel, sha256: hex::encode(Sha256::digest(&bytes)), bytes: bytes.len() as u64 });
        }
        Ok(())
    }

    pub fn write(&self, out: &Path) -> Result<()> {
        let path = out.join(MANIFEST);
        let json = serde_json::to_string_pretty(self).map_err(|e| CliError::Io { path: path.clone(), message: e.to_string() })?;
        fs::write(&path, json + "\n").map_err(CliError::io(&path))
    }

    pub fn read(out: &Path) -> Result<Self> {
        let path = out.join(MANIFEST);
        let text = fs::read_to_string(&path).map_err(CliError::io(&path))?;
        serde_json::from_str(&text).map_err(|e| CliError::Io { path, message: e.to_string() })
    }

    pub fn output(&self, name: &str) -> Option<&OutputFile> {
        self.outputs.iter().find(|o| o.path == name)
    }
}
