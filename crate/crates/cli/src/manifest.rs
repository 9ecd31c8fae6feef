//! Run manifests: content digests of inputs, effective config and outputs.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use gdm_core::Result;
use serde::Serialize;
use sha2::{Digest, Sha256};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Digest over the given files in order, each framed by its length.
pub fn digest_files(files: &[PathBuf]) -> Result<String> {
    let mut h = Sha256::new();
    for f in files {
        let bytes = std::fs::read(f)?;
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(&bytes);
    }
    Ok(hex::encode(h.finalize()))
}

pub fn unix_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

#[derive(Debug, Serialize)]
pub struct OutputEntry {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub code_version: &'static str,
    pub config_digest: String,
    pub dataset_digest: Option<String>,
    pub seed: u64,
    pub started_unix_ms: u64,
    pub ended_unix_ms: u64,
    pub workers: usize,
    pub config: serde_json::Value,
    pub outputs: Vec<OutputEntry>,
}

impl RunManifest {
    pub fn new(command: &str, config: serde_json::Value, seed: u64, started_unix_ms: u64) -> Self {
        let config_digest = sha256_hex(config.to_string().as_bytes());
        Self {
            command: command.to_string(),
            code_version: env!("CARGO_PKG_VERSION"),
            config_digest,
            dataset_digest: None,
            seed,
            started_unix_ms,
            ended_unix_ms: 0,
            workers: 1,
            config,
            outputs: Vec::new(),
        }
    }

    /// Records `path` (stored relative to `root`) with its digest.
    pub fn add_output(&mut self, root: &Path, path: &Path) -> Result<()> {
        let bytes = std::fs::read(path)?;
        let rel = path.strip_prefix(root).unwrap_or(path);
        self.outputs.push(OutputEntry {
            path: rel.display().to_string(),
            sha256: sha256_hex(&bytes),
        });
        Ok(())
    }

    pub fn write(mut self, dir: &Path) -> Result<PathBuf> {
        self.ended_unix_ms = unix_ms();
        let path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(&self).expect("manifest serialises");
        std::fs::write(&path, text + "\n")?;
        Ok(path)
    }
}
