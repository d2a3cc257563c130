//! Output directory bookkeeping: every file written by a command is checksummed
//! into a run manifest.

use crate::error::CliError;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use time::format_description::well_known::Rfc3339;
use time::OffsetDateTime;

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputRecord {
    /// Relative to the output directory.
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub artifact_version: String,
    pub command: String,
    /// SHA-256 of the canonical TOML of the effective configuration.
    pub config_hash: String,
    pub started_at: String,
    pub finished_at: String,
    pub outputs: Vec<OutputRecord>,
}

impl RunManifest {
    /// Everything except the timestamps; equal for reruns of the same configuration.
    pub fn fingerprint(&self) -> (&str, &str, &[OutputRecord]) {
        (&self.command, &self.config_hash, &self.outputs)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn now_rfc3339() -> String {
    OffsetDateTime::now_utc().format(&Rfc3339).unwrap_or_else(|_| "unknown".into())
}

/// Writes files into one directory and remembers their checksums.
#[derive(Debug)]
pub struct OutputSink {
    dir: PathBuf,
    records: Vec<OutputRecord>,
}

impl OutputSink {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
        Ok(OutputSink { dir: dir.to_path_buf(), records: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn records(&self) -> &[OutputRecord] {
        &self.records
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.dir.join(name);
        std::fs::write(&path, bytes)
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
        self.records.retain(|r| r.path != name);
        self.records.push(OutputRecord {
            path: name.to_string(),
            bytes: bytes.len() as u64,
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }

    pub fn write_csv<R: Serialize>(&mut self, name: &str, rows: &[R]) -> Result<(), CliError> {
        let text = oee_core::io::to_csv_string(rows)?;
        self.write(name, text.as_bytes())
    }

    pub fn write_json<V: Serialize>(&mut self, name: &str, value: &V) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    /// Writes `manifest_<command>.json` listing everything written so far.
    pub fn finish(
        self,
        command: &str,
        config_hash: String,
        started_at: String,
    ) -> Result<RunManifest, CliError> {
        let mut outputs = self.records.clone();
        outputs.sort_by(|a, b| a.path.cmp(&b.path));
        let manifest = RunManifest {
            artifact_version: ARTIFACT_VERSION.to_string(),
            command: command.to_string(),
            config_hash,
            started_at,
            finished_at: now_rfc3339(),
            outputs,
        };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        let path = self.dir.join(format!("manifest_{command}.json"));
        std::fs::write(&path, text)
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
        Ok(manifest)
    }
}
