use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

pub const MANIFEST_FILE: &str = dagmm::formats::MANIFEST_FILE;

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub inputs: Vec<PathBuf>,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub version: String,
    pub started_unix: u64,
    pub finished_unix: u64,
    /// Paths relative to the directory holding the manifest.
    pub outputs: Vec<String>,
}

pub fn now_unix() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

pub struct ManifestBuilder {
    command: String,
    inputs: Vec<PathBuf>,
    config: serde_json::Value,
    seed: Option<u64>,
    started: u64,
}

impl ManifestBuilder {
    pub fn start(command: &str, inputs: &[&Path], config: &impl Serialize, seed: Option<u64>) -> Self {
        ManifestBuilder {
            command: command.to_string(),
            inputs: inputs.iter().map(|p| p.to_path_buf()).collect(),
            config: serde_json::to_value(config).unwrap_or(serde_json::Value::Null),
            seed,
            started: now_unix(),
        }
    }

    /// Writes `manifest.json` into `dir` through a temporary file and a rename.
    pub fn finish(self, dir: &Path, outputs: Vec<String>) -> dagmm::Result<()> {
        for out in &outputs {
            if !dir.join(out).exists() {
                return Err(std::io::Error::new(
                    std::io::ErrorKind::NotFound,
                    format!("listed output `{out}` was not written"),
                )
                .into());
            }
        }
        let manifest = RunManifest {
            command: self.command,
            inputs: self.inputs,
            config: self.config,
            seed: self.seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            started_unix: self.started,
            finished_unix: now_unix(),
            outputs,
        };
        let tmp = dir.join(format!(".{MANIFEST_FILE}.tmp"));
        fs::write(&tmp, serde_json::to_string_pretty(&manifest)? + "\n")?;
        fs::rename(&tmp, dir.join(MANIFEST_FILE))?;
        Ok(())
    }
}
