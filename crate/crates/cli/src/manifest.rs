use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::output::{sha256_hex, Artifact};
use crate::{CliError, Command};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Everything needed to regenerate a run's artifacts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    /// Subcommand path, e.g. `nplayer rate`.
    pub command: String,
    /// Fully resolved arguments of the subcommand.
    pub config: Command,
    /// Base seed; replication `r` and player `j` draw from stream `j` of
    /// ChaCha8 seeded with `seed + r·0x9E3779B97F4A7C15`.
    pub seed: u64,
    /// Worker threads used; artifacts do not depend on it.
    pub threads: usize,
    pub inputs: Vec<Artifact>,
    pub artifacts: Vec<Artifact>,
    pub exit_code: u8,
    pub duration_seconds: f64,
}

impl RunManifest {
    pub fn new(
        command: &Command,
        seed: u64,
        threads: usize,
        inputs: Vec<Artifact>,
        artifacts: Vec<Artifact>,
        exit_code: u8,
        duration_seconds: f64,
    ) -> Self {
        Self {
            tool: "mfgkit".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.name(),
            config: command.clone(),
            seed,
            threads,
            inputs,
            artifacts,
            exit_code,
            duration_seconds,
        }
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let mut bytes = serde_json::to_vec_pretty(self)?;
        bytes.push(b'\n');
        std::fs::write(path, bytes).map_err(|e| CliError::Internal(format!("{}: {e}", path.display())))
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
    }
}

/// Hash of an input file, recorded under its absolute path.
pub fn describe_input(path: &Path) -> Result<Artifact, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    Ok(Artifact {
        path: path.display().to_string(),
        sha256: sha256_hex(&bytes),
        bytes: bytes.len() as u64,
    })
}
