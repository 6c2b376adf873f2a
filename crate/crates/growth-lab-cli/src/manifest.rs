//! Run manifest: the provenance record every subcommand writes last, after
//! all listed outputs exist on disk.

use serde::Serialize;
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{write_file, CliError};

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    /// SHA-256 of the resolved config serialization below.
    pub config_digest: String,
    pub seed: u64,
    /// File names relative to the output directory, excluding the manifest.
    pub outputs: Vec<String>,
    pub started: String,
    pub finished: String,
    /// Resolved config echo, for reproducing the run.
    pub config: serde_json::Value,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for byte in digest {
        let _ = write!(out, "{byte:02x}");
    }
    out
}

pub struct ManifestBuilder {
    command: String,
    seed: u64,
    config: serde_json::Value,
    config_digest: String,
    started: String,
    outputs: Vec<String>,
}

impl ManifestBuilder {
    pub fn new<C: Serialize>(command: &str, config: &C, seed: u64) -> Result<Self, CliError> {
        let config = serde_json::to_value(config)
            .map_err(|e| CliError::validation(format!("could not serialize config: {e}")))?;
        let bytes = serde_json::to_vec(&config)
            .map_err(|e| CliError::validation(format!("could not serialize config: {e}")))?;
        Ok(ManifestBuilder {
            command: command.to_string(),
            seed,
            config_digest: sha256_hex(&bytes),
            config,
            started: chrono::Utc::now().to_rfc3339(),
            outputs: Vec::new(),
        })
    }

    pub fn add_output(&mut self, name: &str) {
        self.outputs.push(name.to_string());
    }

    /// Checks that every recorded output exists, then writes
    /// `manifest.json` — always the final write of a run.
    pub fn finish(self, out_dir: &Path) -> Result<RunManifest, CliError> {
        for name in &self.outputs {
            let path = out_dir.join(name);
            if !path.exists() {
                return Err(CliError::io(format!(
                    "output {} listed in manifest but missing on disk",
                    path.display()
                )));
            }
        }
        let manifest = RunManifest {
            command: self.command,
            config_digest: self.config_digest,
            seed: self.seed,
            outputs: self.outputs,
            started: self.started,
            finished: chrono::Utc::now().to_rfc3339(),
            config: self.config,
        };
        let bytes = serde_json::to_vec_pretty(&manifest)
            .map_err(|e| CliError::io(format!("could not serialize manifest: {e}")))?;
        write_file(&out_dir.join("manifest.json"), &bytes)?;
        Ok(manifest)
    }
}
