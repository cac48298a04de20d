//! Run directories: a single writer records every file it produces in the
//! manifest inventory together with its SHA-256.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

pub const MANIFEST: &str = "manifest.json";
pub const SUMMARY: &str = "summary.json";

/// Reals in CSV output: 17 significant digits.
pub fn real(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputEntry {
    pub path: String,
    /// Layout identifier, `name/version`.
    pub schema: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Timing {
    pub started_unix_ms: u128,
    pub wall_seconds: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Host {
    pub os: String,
    pub arch: String,
    pub threads: usize,
    pub parallel_feature: bool,
}

impl Host {
    pub fn current() -> Self {
        Self {
            os: std::env::consts::OS.into(),
            arch: std::env::consts::ARCH.into(),
            threads: std::thread::available_parallelism().map_or(1, |n| n.get()),
            parallel_feature: hnls_core::Execution::parallel_available(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub schema_version: u32,
    pub artifact_version: String,
    pub kind: String,
    pub config_sha256: String,
    pub seed: u64,
    pub signatures: Vec<Value>,
    pub execution: String,
    pub timing: Timing,
    pub host: Host,
    /// The full configuration; `hnls run manifest.json` replays it.
    pub config: Value,
    pub outputs: Vec<OutputEntry>,
}

/// Owns a run directory and its inventory.
pub struct RunWriter {
    dir: PathBuf,
    outputs: Vec<OutputEntry>,
}

impl RunWriter {
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            outputs: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn outputs(&self) -> &[OutputEntry] {
        &self.outputs
    }

    pub fn write_bytes(&mut self, name: &str, schema: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
        fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        self.outputs.push(OutputEntry {
            path: name.into(),
            schema: schema.into(),
            bytes: bytes.len() as u64,
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }

    /// RFC 4180 CSV with a header row.
    pub fn write_csv(&mut self, name: &str, schema: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::io(name, e.into_error()))?;
        self.write_bytes(name, schema, &bytes)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, schema: &str, value: &T) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.write_bytes(name, schema, &bytes)
    }

    /// Writes the manifest last; it is not part of its own inventory.
    pub fn finish(self, mut manifest: RunManifest) -> Result<PathBuf> {
        manifest.outputs = self.outputs;
        let path = self.dir.join(MANIFEST);
        let mut bytes = serde_json::to_vec_pretty(&manifest)?;
        bytes.push(b'\n');
        fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        Ok(self.dir)
    }
}
