//! Output directory bookkeeping and run manifests.

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use upsample_lab::spectral::export::{write_csv, write_pgm};
use upsample_lab::spectral::Spectrogram;
use upsample_lab::Signal;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Pgm,
    Both,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRecord {
    /// Path relative to the output directory (inputs: as given).
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

impl FileRecord {
    pub fn of(path: String, data: &[u8]) -> Self {
        Self {
            path,
            sha256: sha256_hex(data),
            bytes: data.len() as u64,
        }
    }
}

pub fn sha256_hex(data: &[u8]) -> String {
    format!("{:x}", Sha256::digest(data))
}

/// Provenance of one command run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub config_hash: String,
    pub config: serde_json::Value,
    pub inputs: Vec<FileRecord>,
    pub outputs: Vec<FileRecord>,
    pub started_at: String,
    pub finished_at: String,
}

pub const MANIFEST_NAME: &str = "manifest.json";

/// RFC 3339 time. `SOURCE_DATE_EPOCH` pins it for reproducible manifests.
pub fn timestamp() -> String {
    let pinned = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|v| v.trim().parse::<i64>().ok())
        .and_then(|s| chrono::DateTime::from_timestamp(s, 0));
    pinned
        .unwrap_or_else(chrono::Utc::now)
        .to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

/// Writes files under one directory and remembers their hashes.
pub struct OutputDir {
    root: PathBuf,
    format: Format,
    files: Vec<FileRecord>,
    inputs: Vec<FileRecord>,
    started_at: String,
}

impl OutputDir {
    pub fn create(root: impl Into<PathBuf>, format: Format) -> Result<Self> {
        let root = root.into();
        std::fs::create_dir_all(&root)
            .with_context(|| format!("cannot create output directory {}", root.display()))?;
        Ok(Self {
            root,
            format,
            files: Vec::new(),
            inputs: Vec::new(),
            started_at: timestamp(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write_bytes(&mut self, rel: &str, data: &[u8]) -> Result<()> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(&path, data).with_context(|| format!("cannot write {}", path.display()))?;
        self.files.retain(|f| f.path != rel);
        self.files.push(FileRecord::of(rel.to_string(), data));
        Ok(())
    }

    pub fn write_json<T: Serialize + ?Sized>(&mut self, rel: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write_bytes(rel, text.as_bytes())
    }

    pub fn write_text(&mut self, rel: &str, text: &str) -> Result<()> {
        self.write_bytes(rel, text.as_bytes())
    }

    /// Writes `<stem>.csv` and/or `<stem>.pgm` according to the format.
    pub fn write_spectrogram(&mut self, stem: &str, spec: &Spectrogram) -> Result<()> {
        if matches!(self.format, Format::Csv | Format::Both) {
            let mut buf = Vec::new();
            write_csv(spec, &mut buf)?;
            self.write_bytes(&format!("{stem}.csv"), &buf)?;
        }
        if matches!(self.format, Format::Pgm | Format::Both) {
            let mut buf = Vec::new();
            write_pgm(spec, &mut buf)?;
            self.write_bytes(&format!("{stem}.pgm"), &buf)?;
        }
        Ok(())
    }

    pub fn write_signal(&mut self, rel: &str, x: &Signal) -> Result<()> {
        let mut buf = Vec::new();
        upsample_lab::io::write_signal_csv(&mut buf, x)?;
        self.write_bytes(rel, &buf)
    }

    pub fn record_input(&mut self, path: &Path) -> Result<()> {
        let data =
            std::fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
        self.inputs
            .push(FileRecord::of(path.display().to_string(), &data));
        Ok(())
    }

    /// Writes the manifest and returns it.
    pub fn finish(
        mut self,
        command: &str,
        seed: u64,
        config: serde_json::Value,
    ) -> Result<RunManifest> {
        self.files.sort_by(|a, b| a.path.cmp(&b.path));
        let canonical = serde_json::to_string(&config)?;
        let manifest = RunManifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            seed,
            config_hash: sha256_hex(canonical.as_bytes()),
            config,
            inputs: self.inputs,
            outputs: self.files,
            started_at: self.started_at,
            finished_at: timestamp(),
        };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        std::fs::write(self.root.join(MANIFEST_NAME), text)?;
        Ok(manifest)
    }
}
