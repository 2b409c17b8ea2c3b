//! Run manifests: every command writes one JSON manifest naming its inputs
//! (with content hashes), its outputs, and the fully resolved configuration,
//! so any run can be reproduced bit-for-bit from the manifest alone.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Serialize)]
pub struct InputHash {
    pub path: String,
    pub sha256: String,
}

#[derive(Serialize)]
pub struct RunManifest {
    pub command: String,
    pub argv: Vec<String>,
    pub seed: Option<u64>,
    pub config: serde_json::Value,
    pub inputs: Vec<InputHash>,
    pub outputs: Vec<String>,
    pub wall_time_seconds: f64,
}

pub struct ManifestBuilder {
    command: String,
    seed: Option<u64>,
    config: serde_json::Value,
    inputs: Vec<InputHash>,
    outputs: Vec<PathBuf>,
    started: Instant,
}

impl ManifestBuilder {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            seed: None,
            config: serde_json::Value::Null,
            inputs: Vec::new(),
            outputs: Vec::new(),
            started: Instant::now(),
        }
    }

    pub fn seed(&mut self, seed: u64) -> &mut Self {
        self.seed = Some(seed);
        self
    }

    pub fn config(&mut self, config: impl Serialize) -> &mut Self {
        self.config = serde_json::to_value(config).unwrap_or(serde_json::Value::Null);
        self
    }

    pub fn input(&mut self, path: &Path) -> Result<&mut Self, CliError> {
        let bytes = std::fs::read(path)
            .map_err(|e| CliError::data(format!("cannot hash input {}: {e}", path.display())))?;
        let digest = Sha256::digest(&bytes);
        self.inputs.push(InputHash {
            path: path.display().to_string(),
            sha256: hex::encode(digest),
        });
        Ok(self)
    }

    pub fn output(&mut self, path: &Path) -> &mut Self {
        self.outputs.push(path.to_path_buf());
        self
    }

    /// Write the manifest next to the other outputs and return its path.
    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let manifest = RunManifest {
            command: self.command.clone(),
            argv: std::env::args().collect(),
            seed: self.seed,
            config: self.config.clone(),
            inputs: self
                .inputs
                .iter()
                .map(|i| InputHash {
                    path: i.path.clone(),
                    sha256: i.sha256.clone(),
                })
                .collect(),
            outputs: self
                .outputs
                .iter()
                .map(|p| p.display().to_string())
                .collect(),
            wall_time_seconds: self.started.elapsed().as_secs_f64(),
        };
        let file = std::fs::File::create(path)
            .map_err(|e| CliError::data(format!("cannot write manifest {}: {e}", path.display())))?;
        serde_json::to_writer_pretty(file, &manifest)
            .map_err(|e| CliError::data(format!("cannot encode manifest: {e}")))
    }
}
