//! Run manifests: enough to reproduce any command's outputs exactly.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use pals::Result;

#[derive(Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_digest: String,
    pub seed: u64,
    pub tool_version: String,
    pub output_paths: Vec<String>,
    pub converged: Option<bool>,
}

impl RunManifest {
    pub fn new(command: &str, digest: String, seed: u64, outputs: &[PathBuf]) -> Self {
        RunManifest {
            command: command.to_string(),
            config_digest: digest,
            seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            output_paths: outputs
                .iter()
                .map(|p| p.display().to_string())
                .collect(),
            converged: None,
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self).map_err(pals::Error::Json)?;
        text.push('\n');
        pals::io::write_atomic(path, &text)
    }
}
