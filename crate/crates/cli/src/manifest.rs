use std::fs;
use std::path::Path;

use plcnoise::{Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileHash {
    pub path: String,
    pub sha256: String,
}

/// Written as `manifest.json` next to every command's outputs. Passing it
/// back through `--config` re-runs the command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool_version: String,
    pub command: String,
    pub seed: u64,
    pub config: RunConfig,
    pub inputs: Vec<FileHash>,
    pub artifacts: Vec<FileHash>,
    /// Command-specific results such as the final FID.
    pub summary: serde_json::Value,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path)?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

pub fn hash_entry(path: &Path, base: Option<&Path>) -> Result<FileHash> {
    let shown = base
        .and_then(|b| path.strip_prefix(b).ok())
        .unwrap_or(path)
        .to_string_lossy()
        .into_owned();
    Ok(FileHash {
        path: shown,
        sha256: sha256_file(path)?,
    })
}

impl Manifest {
    pub fn write(&self, dir: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))?;
        fs::write(dir.join("manifest.json"), text + "\n")?;
        Ok(())
    }
}
