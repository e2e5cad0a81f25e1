//! Run manifests: every command records the resolved configuration hash,
//! seed, thread cap and output list, so identical manifests imply
//! identical numeric outputs (in the single-thread reference mode and, for
//! the harness, at any thread count).

use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::{CliError, CliResult};

#[derive(Serialize)]
pub(crate) struct Manifest {
    pub command: &'static str,
    pub version: &'static str,
    pub seed: Option<u64>,
    pub threads: usize,
    pub config_hash: String,
    pub outputs: Vec<String>,
}

impl Manifest {
    pub fn new<C: Serialize>(
        command: &'static str,
        resolved_config: &C,
        seed: Option<u64>,
        threads: usize,
    ) -> CliResult<Self> {
        let canonical = serde_json::to_string(resolved_config)
            .map_err(|e| CliError::Internal(format!("serializing config: {e}")))?;
        let mut hasher = Sha256::new();
        hasher.update(canonical.as_bytes());
        let digest = hasher.finalize();
        let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
        Ok(Self {
            command,
            version: env!("CARGO_PKG_VERSION"),
            seed,
            threads,
            config_hash: format!("sha256:{hex}"),
            outputs: Vec::new(),
        })
    }

    pub fn record_output(&mut self, path: &Path) {
        self.outputs.push(
            path.file_name()
                .unwrap_or_default()
                .to_string_lossy()
                .into_owned(),
        );
    }

    pub fn write(&self, dir: &Path) -> CliResult<()> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| CliError::Internal(format!("serializing manifest: {e}")))?;
        write_text(&dir.join("manifest.json"), &text)
    }
}

pub(crate) fn write_text(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| CliError::Io(format!("writing {}: {e}", path.display())))
}

pub(crate) fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("reading {}: {e}", path.display())))
}
