use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub resolved_config: BTreeMap<String, String>,
    pub seed: u64,
    pub tool_version: String,
    pub outputs: Vec<OutputFile>,
    /// Command-specific details such as codebook digests.
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub details: serde_json::Value,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes `bytes` to `dir/name` through a temporary file and a rename.
pub fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(dir)?;
    let target = dir.join(name);
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, &target)?;
    Ok(target)
}

/// Collects output files and writes them plus `manifest.json`.
#[derive(Debug)]
pub struct OutputSet {
    dir: PathBuf,
    outputs: Vec<OutputFile>,
}

impl OutputSet {
    pub fn new(dir: &Path) -> Self {
        Self {
            dir: dir.to_path_buf(),
            outputs: Vec::new(),
        }
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let p = write_atomic(&self.dir, name, bytes)?;
        self.outputs.push(OutputFile {
            path: name.to_string(),
            sha256: sha256_hex(bytes),
        });
        Ok(p)
    }

    pub fn finish(
        self,
        command: &str,
        resolved_config: BTreeMap<String, String>,
        seed: u64,
        details: serde_json::Value,
    ) -> Result<RunManifest, CliError> {
        let m = RunManifest {
            command: command.to_string(),
            resolved_config,
            seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            outputs: self.outputs,
            details,
        };
        let mut json = serde_json::to_string_pretty(&m).expect("manifest serializes");
        json.push('\n');
        write_atomic(&self.dir, "manifest.json", json.as_bytes())?;
        Ok(m)
    }
}
