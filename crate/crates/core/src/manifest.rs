//! Run manifests written beside every CLI output.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::digest::{file_digest, sha256_hex};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRecord {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub command_line: Vec<String>,
    /// Digest of the effective options (not the raw command line).
    pub config_digest: String,
    pub seeds: BTreeMap<String, u64>,
    pub deterministic: bool,
    pub inputs: Vec<FileRecord>,
    pub outputs: Vec<FileRecord>,
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
}

fn now_ms() -> u128 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0)
}

fn record(path: &Path) -> Result<FileRecord> {
    Ok(FileRecord {
        path: path.display().to_string(),
        sha256: file_digest(path)?,
    })
}

/// Collects inputs and outputs while a subcommand runs.
#[derive(Debug, Clone)]
pub struct ManifestBuilder {
    command: String,
    command_line: Vec<String>,
    options: String,
    seeds: BTreeMap<String, u64>,
    deterministic: bool,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    started: u128,
}

impl ManifestBuilder {
    pub fn new(command: &str, command_line: Vec<String>, options: &str, deterministic: bool) -> Self {
        ManifestBuilder {
            command: command.to_owned(),
            command_line,
            options: options.to_owned(),
            seeds: BTreeMap::new(),
            deterministic,
            inputs: Vec::new(),
            outputs: Vec::new(),
            started: now_ms(),
        }
    }

    pub fn seed(&mut self, name: &str, value: u64) -> &mut Self {
        self.seeds.insert(name.to_owned(), value);
        self
    }

    pub fn input(&mut self, path: impl Into<PathBuf>) -> &mut Self {
        self.inputs.push(path.into());
        self
    }

    pub fn output(&mut self, path: impl Into<PathBuf>) -> &mut Self {
        self.outputs.push(path.into());
        self
    }

    pub fn finish(&self) -> Result<RunManifest> {
        Ok(RunManifest {
            tool: env!("CARGO_PKG_NAME").to_owned(),
            version: env!("CARGO_PKG_VERSION").to_owned(),
            command: self.command.clone(),
            command_line: self.command_line.clone(),
            config_digest: sha256_hex(self.options.as_bytes()),
            seeds: self.seeds.clone(),
            deterministic: self.deterministic,
            inputs: self.inputs.iter().map(|p| record(p)).collect::<Result<_>>()?,
            outputs: self.outputs.iter().map(|p| record(p)).collect::<Result<_>>()?,
            started_unix_ms: self.started,
            finished_unix_ms: now_ms(),
        })
    }
}

impl RunManifest {
    /// `<output>.manifest.json` for a file, `<dir>/manifest.json` for a directory.
    pub fn path_for(output: &Path) -> PathBuf {
        if output.is_dir() {
            output.join("manifest.json")
        } else {
            let mut name = output.file_name().map(|n| n.to_os_string()).unwrap_or_default();
            name.push(".manifest.json");
            output.with_file_name(name)
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self).map_err(|e| Error::Numeric(e.to_string()))?;
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path, e.line(), e.to_string()))
    }
}
