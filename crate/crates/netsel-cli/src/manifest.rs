//! Run manifests: every invocation records its resolved configuration,
//! seeds and produced files, success or failure.

use serde::Serialize;
use std::path::{Path, PathBuf};

#[derive(Serialize)]
pub struct RunManifest {
    pub command: String,
    pub argv: Vec<String>,
    pub resolved: serde_json::Value,
    pub master_seed: u64,
    pub outputs: Vec<String>,
    pub version: String,
    pub timestamp: String,
    pub status: String,
}

pub struct ManifestBuilder {
    manifest: RunManifest,
    path: PathBuf,
}

impl ManifestBuilder {
    /// `path` is where the manifest itself will be written.
    pub fn new(command: &str, seed: u64, path: PathBuf) -> Self {
        Self {
            manifest: RunManifest {
                command: command.to_string(),
                argv: std::env::args().collect(),
                resolved: serde_json::Value::Null,
                master_seed: seed,
                outputs: Vec::new(),
                version: netsel::VERSION.to_string(),
                timestamp: chrono::Utc::now().to_rfc3339(),
                status: "ok".to_string(),
            },
            path,
        }
    }

    pub fn resolved(&mut self, value: serde_json::Value) {
        self.manifest.resolved = value;
    }

    pub fn add_output(&mut self, path: &Path) {
        self.manifest.outputs.push(path.display().to_string());
    }

    /// Writes the manifest with the given status; called on both the success
    /// and the failure path.
    pub fn write(&mut self, status: &str) -> std::io::Result<()> {
        self.manifest.status = status.to_string();
        let text = serde_json::to_string_pretty(&self.manifest)?;
        if let Some(parent) = self.path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent)?;
            }
        }
        std::fs::write(&self.path, text)
    }
}

/// Manifest path for a single-file output: `<out>.manifest.json`.
pub fn manifest_path_for_file(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    out.with_file_name(name)
}
