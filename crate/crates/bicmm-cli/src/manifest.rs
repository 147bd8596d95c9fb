//! Run manifest: one JSON record per invocation, written even on error.

use serde::Serialize;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Serialize)]
pub struct ErrorRecord {
    pub code: String,
    pub message: String,
}

#[derive(Serialize)]
pub struct RunManifest {
    pub command: String,
    pub argv: Vec<String>,
    pub config: serde_json::Value,
    pub truncation: serde_json::Value,
    pub tolerances: serde_json::Value,
    pub wall_clock_seconds: f64,
    pub outputs: Vec<String>,
    pub library_version: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorRecord>,
}

pub struct ManifestWriter {
    started: Instant,
    out_dir: PathBuf,
    command: String,
    config: serde_json::Value,
    truncation: serde_json::Value,
    tolerances: serde_json::Value,
    outputs: Vec<String>,
}

impl ManifestWriter {
    pub fn new(out_dir: &Path, command: &str, spec: Option<&bicmm::ProblemSpec>) -> Self {
        let config = spec
            .map(|s| serde_json::to_value(s).unwrap_or(serde_json::Value::Null))
            .unwrap_or(serde_json::Value::Null);
        let truncation = spec
            .map(|s| serde_json::to_value(s.truncation).unwrap_or(serde_json::Value::Null))
            .unwrap_or(serde_json::Value::Null);
        let tolerances = spec
            .map(|s| serde_json::to_value(s.tolerances).unwrap_or(serde_json::Value::Null))
            .unwrap_or(serde_json::Value::Null);
        ManifestWriter {
            started: Instant::now(),
            out_dir: out_dir.to_path_buf(),
            command: command.to_string(),
            config,
            truncation,
            tolerances,
            outputs: Vec::new(),
        }
    }

    /// Registers an output file and returns its full path.
    pub fn output(&mut self, name: &str) -> PathBuf {
        let _ = std::fs::create_dir_all(&self.out_dir);
        self.outputs.push(name.to_string());
        self.out_dir.join(name)
    }

    pub fn finish(self, error: Option<ErrorRecord>) -> std::io::Result<()> {
        std::fs::create_dir_all(&self.out_dir)?;
        let manifest = RunManifest {
            command: self.command,
            argv: std::env::args().collect(),
            config: self.config,
            truncation: self.truncation,
            tolerances: self.tolerances,
            wall_clock_seconds: self.started.elapsed().as_secs_f64(),
            outputs: self.outputs,
            library_version: env!("CARGO_PKG_VERSION").to_string(),
            error,
        };
        let path = self.out_dir.join("run_manifest.json");
        std::fs::write(path, serde_json::to_string_pretty(&manifest)?)
    }
}

/// Writes a CSV file with the given header and rows of already-formatted
/// fields.
pub fn write_csv(path: &Path, header: &str, rows: &[Vec<String>]) -> std::io::Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut text = String::with_capacity(rows.len() * 32 + header.len() + 1);
    text.push_str(header);
    text.push('\n');
    for row in rows {
        text.push_str(&row.join(","));
        text.push('\n');
    }
    std::fs::write(path, text)
}
