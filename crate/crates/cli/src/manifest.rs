//! Run manifest written beside every command's outputs.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::Result;
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_file: Option<PathBuf>,
    pub seeds: Vec<u64>,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
    /// Effective settings after merging flags, config file and defaults.
    pub settings: Value,
}

impl RunManifest {
    pub fn new(command: &str, config_file: Option<&Path>) -> Self {
        let timestamp = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
        Self {
            command: command.into(),
            config_file: config_file.map(Path::to_path_buf),
            seeds: Vec::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            timestamp,
            settings: Value::Null,
        }
    }

    /// `<stem>.run.json` next to `out` (inside `out` when it is a directory).
    pub fn path_for(out: &Path) -> PathBuf {
        if out.is_dir() {
            return out.join("run.json");
        }
        let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        out.with_file_name(format!("{stem}.run.json"))
    }

    pub fn write(&self, out: &Path) -> Result<PathBuf> {
        let path = Self::path_for(out);
        std::fs::write(&path, serde_json::to_string_pretty(self)?)?;
        Ok(path)
    }
}
