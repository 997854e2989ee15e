//! Run manifests: what was run, with which settings, and checksums of
//! everything it wrote. No timestamps or host details, so two runs with the
//! same inputs produce the same manifest byte for byte.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bundle::json_bytes;
use crate::csvio::write_file;
use crate::error::{FormatError, Result};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub config: serde_json::Value,
    pub inputs: Vec<String>,
    pub seed: Option<u64>,
    /// Output path (relative to the manifest's directory) to SHA-256 hex.
    pub outputs: BTreeMap<String, String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn hash_file(path: &Path) -> Result<String> {
    Ok(sha256_hex(&fs::read(path).map_err(|e| FormatError::io(path, e))?))
}

fn slash_path(rel: &Path) -> String {
    rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/")
}

impl RunManifest {
    pub fn new(command: &str, config: impl Serialize) -> Self {
        Self {
            command: command.into(),
            tool_version: TOOL_VERSION.into(),
            config: serde_json::to_value(config).expect("serializable config"),
            inputs: Vec::new(),
            seed: None,
            outputs: BTreeMap::new(),
        }
    }

    pub fn input(mut self, path: &Path) -> Self {
        self.inputs.push(path.display().to_string());
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    /// Records `file` under its path relative to `root`.
    pub fn add_output(&mut self, root: &Path, file: &Path) -> Result<()> {
        let rel = file.strip_prefix(root).unwrap_or(file);
        self.outputs.insert(slash_path(rel), hash_file(file)?);
        Ok(())
    }

    /// Records every file under `dir`, recursively, except `skip`.
    pub fn add_tree(&mut self, dir: &Path, skip: &Path) -> Result<()> {
        let mut stack = vec![dir.to_path_buf()];
        while let Some(d) = stack.pop() {
            for entry in fs::read_dir(&d).map_err(|e| FormatError::io(&d, e))? {
                let path = entry.map_err(|e| FormatError::io(&d, e))?.path();
                if path.is_dir() {
                    stack.push(path);
                } else if path != skip {
                    self.add_output(dir, &path)?;
                }
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        json_bytes(self)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_file(path, &self.to_bytes())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| FormatError::io(path, e))?;
        serde_json::from_slice(&bytes).map_err(|e| FormatError::Json { path: path.to_path_buf(), message: e.to_string() })
    }
}
