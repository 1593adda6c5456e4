//! Atomic artifact writing; every file carries the config hash.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Output directory bound to one config hash.
#[derive(Debug)]
pub struct ArtifactWriter {
    dir: PathBuf,
    hash: String,
    written: Vec<String>,
}

impl ArtifactWriter {
    pub fn new(dir: &Path, hash: &str) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), hash: hash.to_string(), written: Vec::new() })
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn written(&self) -> &[String] {
        &self.written
    }

    fn persist(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir)?;
        tmp.write_all(bytes)?;
        tmp.as_file().sync_all()?;
        tmp.persist(self.dir.join(name)).map_err(|e| Error::Io(e.error))?;
        self.written.push(name.to_string());
        Ok(())
    }

    /// CSV with a leading `# config_sha256=` comment line.
    pub fn csv<R: Serialize>(&mut self, name: &str, rows: impl IntoIterator<Item = R>) -> Result<()> {
        let mut buf = format!("# config_sha256={}\n", self.hash).into_bytes();
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            for r in rows {
                w.serialize(r).map_err(|e| Error::Numeric(format!("csv: {e}")))?;
            }
            w.flush()?;
        }
        self.persist(name, &buf)
    }

    /// JSON object `{ "config_sha256": ..., "result": value }`.
    pub fn json<V: Serialize>(&mut self, name: &str, value: &V) -> Result<()> {
        let doc = serde_json::json!({ "config_sha256": self.hash, "result": value });
        let text = serde_json::to_string_pretty(&doc).map_err(|e| Error::Numeric(format!("json: {e}")))?;
        self.persist(name, text.as_bytes())
    }

    /// Writes a raw JSON document as-is (used for the manifest).
    pub fn raw_json(&mut self, name: &str, value: &serde_json::Value) -> Result<()> {
        let text = serde_json::to_string_pretty(value).map_err(|e| Error::Numeric(format!("json: {e}")))?;
        self.persist(name, text.as_bytes())
    }
}

/// Provenance record for one run.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub command: String,
    pub config_path: String,
    pub config_sha256: String,
    pub package: &'static str,
    pub version: &'static str,
    pub dependencies: Vec<(&'static str, &'static str)>,
    pub seeds: Vec<u64>,
    pub threads: usize,
    pub outputs: Vec<String>,
    pub summary: serde_json::Value,
}

pub const DEPENDENCIES: [(&str, &str); 4] = [("nalgebra", "0.33"), ("rustfft", "6"), ("rayon", "1"), ("rand_chacha", "0.3")];
