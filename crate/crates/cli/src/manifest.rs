use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{hex, PipelineConfig};
use crate::CliError;

/// What a subcommand consumed and produced. Written as
/// `<output_dir>/manifests/<command>.json`; no timestamps, so reruns
/// produce identical bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub config_hash: String,
    pub seed: u64,
    pub data_seed: Option<u64>,
    pub resolution: u32,
    pub lead_subset: String,
    pub leads: Vec<String>,
    pub channels: usize,
    pub config: PipelineConfig,
    /// File name → SHA-256, relative to the output directory where possible.
    pub outputs: BTreeMap<String, String>,
    pub summary: BTreeMap<String, serde_json::Value>,
}

impl RunManifest {
    pub fn new(command: &str, config: &PipelineConfig) -> Self {
        Self {
            command: command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: config.hash(),
            seed: config.train.seed,
            data_seed: None,
            resolution: config.resolution,
            lead_subset: config.leads.to_string(),
            leads: config.leads.leads(),
            channels: config.leads.n_channels(),
            config: config.clone(),
            outputs: BTreeMap::new(),
            summary: BTreeMap::new(),
        }
    }

    pub fn note(&mut self, key: &str, value: impl Serialize) {
        self.summary.insert(
            key.to_string(),
            serde_json::to_value(value).expect("summary serializes"),
        );
    }

    /// Writes `bytes` under the output directory and records its digest.
    pub fn write(&mut self, out_dir: &Path, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = out_dir.join(name);
        write_file(&path, bytes)?;
        self.outputs.insert(name.to_string(), sha256(bytes));
        Ok(())
    }

    pub fn save(&self, out_dir: &Path) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        write_file(
            &out_dir.join("manifests").join(format!("{}.json", self.command)),
            text.as_bytes(),
        )
    }
}

pub fn sha256(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

pub fn read_file(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| CliError::io(path, e))
}
