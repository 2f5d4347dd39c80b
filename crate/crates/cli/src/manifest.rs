use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::config::Settings;

#[derive(Debug, Clone, Serialize)]
pub struct FileOutcome {
    pub file: String,
    pub ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Value::is_null")]
    pub detail: Value,
}

impl FileOutcome {
    pub fn ok(file: impl Into<String>, detail: Value) -> Self {
        Self {
            file: file.into(),
            ok: true,
            seed: None,
            detail,
        }
    }

    pub fn failed(file: impl Into<String>, error: impl std::fmt::Display) -> Self {
        Self {
            file: file.into(),
            ok: false,
            seed: None,
            detail: Value::String(error.to_string()),
        }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self {
            seed: Some(seed),
            ..self
        }
    }
}

/// Everything needed to reproduce a run that wrote files.
#[derive(Debug, Serialize)]
pub struct RunManifest<'a> {
    pub command: Vec<String>,
    pub version: &'static str,
    pub config: &'a Settings,
    pub seed: u64,
    pub outcomes: Vec<FileOutcome>,
}

impl<'a> RunManifest<'a> {
    pub fn new(settings: &'a Settings, outcomes: Vec<FileOutcome>) -> Self {
        Self {
            command: std::env::args().collect(),
            version: env!("CARGO_PKG_VERSION"),
            config: settings,
            seed: settings.deform.seed,
            outcomes,
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n")
            .with_context(|| format!("writing manifest {}", path.display()))
    }
}

/// `<output>.manifest.json` beside a single output file.
pub fn beside(output: &Path) -> PathBuf {
    let mut name = output.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    output.with_file_name(name)
}

/// Seed for one file: the first eight bytes of SHA-256 over the global seed
/// (little endian) followed by the file name.
pub fn image_seed(global: u64, file_name: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(global.to_le_bytes());
    hasher.update(file_name.as_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest is 32 bytes"))
}
