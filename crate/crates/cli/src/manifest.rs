//! Run manifest written next to the outputs of every command.

use std::path::Path;
use std::time::Duration;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::CliError;

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub library_version: String,
    /// SHA-256 of the effective configuration (after command-line overrides).
    pub config_sha256: String,
    pub threads: usize,
    pub wall_time_s: f64,
    pub outputs: Vec<String>,
    pub error: Option<String>,
}

pub fn config_hash(config: &RunConfig) -> Result<String, CliError> {
    let text = serde_json::to_string(config).map_err(|e| CliError::Config(e.to_string()))?;
    Ok(Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect())
}

impl Manifest {
    pub fn new(
        command: &str,
        config: &RunConfig,
        threads: usize,
        wall: Duration,
        outputs: Vec<String>,
        error: Option<String>,
    ) -> Result<Self, CliError> {
        Ok(Manifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            library_version: lcf_shape::VERSION.to_string(),
            config_sha256: config_hash(config)?,
            threads,
            wall_time_s: wall.as_secs_f64(),
            outputs,
            error,
        })
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        let path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(self).map_err(|e| CliError::Config(e.to_string()))?;
        std::fs::write(&path, text + "\n").map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}
