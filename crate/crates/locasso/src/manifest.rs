//! Run manifests, written before any computation so every output file can
//! point back to the exact inputs that produced it.

use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub args: Vec<String>,
    pub seed: u64,
    /// True when no seed was given and one was drawn.
    pub seed_generated: bool,
    pub jobs: Option<usize>,
    pub started_unix: u64,
    /// The resolved configuration, when the command has one.
    pub config: Option<serde_json::Value>,
}

impl RunManifest {
    pub fn new(command: &str, seed: u64, seed_generated: bool, jobs: Option<usize>) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: command.into(),
            args: std::env::args().collect(),
            seed,
            seed_generated,
            jobs,
            started_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_secs()),
            config: None,
        }
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(std::io::Error::other)?;
        std::fs::write(path, text + "\n")
    }
}
