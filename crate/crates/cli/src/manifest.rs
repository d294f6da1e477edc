//! Run manifest written next to every command's artifacts.

use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct InputRecord {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Versions {
    pub cli: &'static str,
    pub library: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub command: String,
    pub versions: Versions,
    pub seed: u64,
    pub config: Map<String, Value>,
    pub inputs: Vec<InputRecord>,
    pub outputs: Vec<String>,
    pub results: Map<String, Value>,
    pub started_unix_seconds: u64,
    pub wall_time_seconds: f64,
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(Sha256::digest(&bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect())
}

/// Accumulates a manifest while a command runs.
pub struct Recorder {
    command: String,
    seed: u64,
    started: Instant,
    started_unix: u64,
    out_dir: PathBuf,
    pub config: Map<String, Value>,
    pub inputs: Vec<InputRecord>,
    pub outputs: Vec<String>,
    pub results: Map<String, Value>,
}

impl Recorder {
    pub fn new(command: &str, seed: u64, out_dir: &Path) -> Self {
        let started_unix = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Self {
            command: command.to_string(),
            seed,
            started: Instant::now(),
            started_unix,
            out_dir: out_dir.to_path_buf(),
            config: Map::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            results: Map::new(),
        }
    }

    pub fn config(&mut self, key: &str, value: impl Serialize) {
        self.config.insert(
            key.to_string(),
            serde_json::to_value(value).unwrap_or(Value::Null),
        );
    }

    pub fn result(&mut self, key: &str, value: impl Serialize) {
        self.results.insert(
            key.to_string(),
            serde_json::to_value(value).unwrap_or(Value::Null),
        );
    }

    pub fn input(&mut self, path: &Path) -> Result<(), CliError> {
        let sha256 = sha256_file(path)?;
        self.inputs.push(InputRecord {
            path: path.display().to_string(),
            sha256,
        });
        Ok(())
    }

    /// Path of an artifact inside the output directory, recorded by name.
    pub fn output(&mut self, name: &str) -> PathBuf {
        self.outputs.push(name.to_string());
        self.out_dir.join(name)
    }

    pub fn finish(self) -> Result<Manifest, CliError> {
        let manifest = Manifest {
            schema_version: SCHEMA_VERSION,
            command: self.command,
            versions: Versions {
                cli: env!("CARGO_PKG_VERSION"),
                library: helmholtzian::VERSION,
            },
            seed: self.seed,
            config: self.config,
            inputs: self.inputs,
            outputs: self.outputs,
            results: self.results,
            started_unix_seconds: self.started_unix,
            wall_time_seconds: self.started.elapsed().as_secs_f64(),
        };
        let path = self.out_dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(&manifest)
            .map_err(|e| CliError::Internal(format!("manifest serialization: {e}")))?;
        std::fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))?;
        Ok(manifest)
    }
}
