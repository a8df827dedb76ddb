//! Output files, checksums and the run manifest.

use crate::config::RunConfig;
use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fs;
use std::path::{Path, PathBuf};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputRecord {
    pub file: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub threads: usize,
    pub wall_seconds: f64,
    pub config: RunConfig,
    pub outputs: Vec<OutputRecord>,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading manifest {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing manifest {}", path.display()))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes stage outputs into one directory and remembers them for cleanup.
pub struct OutputDir {
    dir: PathBuf,
    created_dir: bool,
    written: Vec<PathBuf>,
    records: Vec<OutputRecord>,
}

impl OutputDir {
    pub fn create(dir: &Path) -> Result<Self> {
        let created_dir = !dir.exists();
        fs::create_dir_all(dir)
            .with_context(|| format!("creating output directory {}", dir.display()))?;
        Ok(OutputDir {
            dir: dir.to_path_buf(),
            created_dir,
            written: Vec::new(),
            records: Vec::new(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        self.written.push(path);
        self.records.push(OutputRecord {
            file: name.to_string(),
            sha256: sha256_hex(contents.as_bytes()),
            bytes: contents.len(),
        });
        Ok(())
    }

    pub fn records(&self) -> &[OutputRecord] {
        &self.records
    }

    /// Removes everything written so far, and the directory if this run created it.
    pub fn discard(self) {
        for p in &self.written {
            let _ = fs::remove_file(p);
        }
        let _ = fs::remove_file(self.dir.join(MANIFEST_FILE));
        if self.created_dir {
            let _ = fs::remove_dir(&self.dir);
        }
    }
}
