//! Run manifests: the resolved configuration plus digests of every input and
//! output file.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::failure::{CliResult, Failure};

pub const FILE_NAME: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    /// Fully resolved configuration as TOML.
    pub config: String,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

pub fn sha256_file(path: &Path) -> CliResult<String> {
    let bytes = fs::read(path)
        .map_err(|e| Failure::invalid(format!("cannot read {}: {e}", path.display())))?;
    Ok(format!("{:x}", Sha256::digest(&bytes)))
}

pub fn digest(path: &Path, label: impl Into<String>) -> CliResult<FileDigest> {
    Ok(FileDigest {
        path: label.into(),
        sha256: sha256_file(path)?,
    })
}

impl Manifest {
    pub fn new(command: &str, seed: u64, config: String) -> Self {
        Manifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            seed,
            config,
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Failure::invalid(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| Failure::invalid(format!("{}: not a run manifest: {e}", path.display())))
    }

    /// Fails when an input file changed since the manifest was written.
    pub fn verify_inputs(&self) -> CliResult {
        for input in &self.inputs {
            let now = sha256_file(Path::new(&input.path))?;
            if now != input.sha256 {
                return Err(Failure::invalid(format!(
                    "input {} changed since the manifest was written",
                    input.path
                )));
            }
        }
        Ok(())
    }

    pub fn write(&self, path: &Path) -> CliResult {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(path, text + "\n")?;
        Ok(())
    }
}
