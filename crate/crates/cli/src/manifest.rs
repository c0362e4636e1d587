//! Run manifests and atomic artifact writes.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::CliError;

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes =
        std::fs::read(path).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Writes through a sibling temporary file so readers never see a partial
/// artifact.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, bytes).map_err(|e| CliError::output(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| CliError::output(path, e))
}

fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0.0, |d| d.as_secs_f64())
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub config: RunConfig,
    /// Input file name to SHA-256.
    pub inputs: BTreeMap<String, String>,
    /// Artifact file name to SHA-256.
    pub artifacts: BTreeMap<String, String>,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub wall_seconds: f64,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub summary: BTreeMap<String, serde_json::Value>,
}

/// Collects inputs and artifacts of a run and writes `manifest.json` last.
pub struct RunRecorder {
    config: RunConfig,
    inputs: BTreeMap<String, String>,
    artifacts: BTreeMap<String, String>,
    summary: BTreeMap<String, serde_json::Value>,
    started_unix: f64,
    clock: Instant,
}

impl RunRecorder {
    pub fn start(config: RunConfig) -> Result<Self, CliError> {
        std::fs::create_dir_all(&config.out).map_err(|e| CliError::output(&config.out, e))?;
        Ok(Self {
            config,
            inputs: BTreeMap::new(),
            artifacts: BTreeMap::new(),
            summary: BTreeMap::new(),
            started_unix: unix_now(),
            clock: Instant::now(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.config.out.join(name)
    }

    pub fn input(&mut self, path: &Path) -> Result<(), CliError> {
        let hash = sha256_file(path)?;
        self.inputs.insert(path.display().to_string(), hash);
        Ok(())
    }

    pub fn artifact(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        write_atomic(&self.path(name), bytes)?;
        self.artifacts
            .insert(name.to_string(), hex::encode(Sha256::digest(bytes)));
        Ok(())
    }

    pub fn json_artifact<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text =
            serde_json::to_string_pretty(value).map_err(|e| CliError::runtime(e.to_string()))?;
        text.push('\n');
        self.artifact(name, text.as_bytes())
    }

    pub fn summary(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).unwrap_or(serde_json::Value::Null);
        self.summary.insert(key.to_string(), v);
    }

    pub fn finish(self) -> Result<PathBuf, CliError> {
        let finished = unix_now();
        let path = self.path("manifest.json");
        let m = Manifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            config: self.config,
            inputs: self.inputs,
            artifacts: self.artifacts,
            started_unix: self.started_unix,
            finished_unix: finished,
            wall_seconds: self.clock.elapsed().as_secs_f64(),
            summary: self.summary,
        };
        let text =
            serde_json::to_string_pretty(&m).map_err(|e| CliError::runtime(e.to_string()))?;
        write_atomic(&path, text.as_bytes())?;
        Ok(path)
    }
}
