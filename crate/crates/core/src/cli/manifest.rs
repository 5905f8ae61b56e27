use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::error::{DidError, Result};

/// Provenance record written next to every result file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Arguments that reproduce the run when passed back to the binary.
    pub argv: Vec<String>,
    /// Resolved parameter values, defaults included.
    pub parameters: serde_json::Value,
    pub seeds: Vec<u64>,
    pub version: String,
    /// SHA-256 of the standardization constants text, for simulation runs.
    pub constants_sha256: Option<String>,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub outputs: Vec<PathBuf>,
}

impl RunManifest {
    pub fn new(command: &str, argv: Vec<String>, parameters: serde_json::Value) -> Self {
        RunManifest {
            command: command.to_string(),
            argv,
            parameters,
            seeds: Vec::new(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            constants_sha256: None,
            started_unix: unix_now(),
            finished_unix: 0,
            outputs: Vec::new(),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| DidError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| DidError::Format { path: path.to_path_buf(), message: e.to_string() })
    }

    pub fn write(&mut self, path: &Path) -> Result<()> {
        self.finished_unix = unix_now();
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(path, text + "\n").map_err(|e| DidError::io(path, e))
    }
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

/// JSON and manifest paths belonging to a CSV output path.
pub fn sidecar_paths(csv: &Path) -> (PathBuf, PathBuf) {
    (csv.with_extension("json"), csv.with_extension("manifest.json"))
}
