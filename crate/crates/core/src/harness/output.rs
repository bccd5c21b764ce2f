use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::config::ExperimentConfig;
use super::validation::CheckRow;
use super::HarnessError;

/// 17 significant digits, enough to round-trip an `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FileRecord {
    /// Relative to the run directory, `/`-separated.
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

pub fn sha256_hex(data: &[u8]) -> String {
    hex::encode(Sha256::digest(data))
}

/// Writes files under one run directory and records their checksums.
#[derive(Debug)]
pub struct OutputSink {
    root: PathBuf,
    files: Vec<FileRecord>,
}

impl OutputSink {
    pub fn create(root: &Path) -> Result<Self, HarnessError> {
        fs::create_dir_all(root).map_err(|e| HarnessError::io(root, e))?;
        Ok(OutputSink { root: root.to_path_buf(), files: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn files(&self) -> &[FileRecord] {
        &self.files
    }

    pub fn write_bytes(&mut self, relative: &str, data: &[u8]) -> Result<(), HarnessError> {
        let path = self.root.join(relative);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| HarnessError::io(parent, e))?;
        }
        fs::write(&path, data).map_err(|e| HarnessError::io(&path, e))?;
        self.files.push(FileRecord { path: relative.to_string(), sha256: sha256_hex(data), bytes: data.len() });
        Ok(())
    }

    pub fn write_csv(&mut self, relative: &str, header: &[String], rows: &[Vec<String>]) -> Result<(), HarnessError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let to_err = |e: csv::Error| HarnessError::io(Path::new(relative), std::io::Error::other(e));
        w.write_record(header).map_err(to_err)?;
        for row in rows {
            w.write_record(row).map_err(to_err)?;
        }
        let data = w.into_inner().map_err(|e| HarnessError::io(Path::new(relative), e.into_error()))?;
        self.write_bytes(relative, &data)
    }

    pub fn write_json<T: Serialize>(&mut self, relative: &str, value: &T) -> Result<(), HarnessError> {
        let mut data = serde_json::to_vec_pretty(value).expect("serializable output");
        data.push(b'\n');
        self.write_bytes(relative, &data)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Taint {
    pub kind: String,
    pub detail: String,
}

/// Summary written to `manifest.json`. Only this file carries timestamps.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub experiment: String,
    pub config: ExperimentConfig,
    pub started_at: String,
    pub wall_clock_seconds: f64,
    pub tolerances: BTreeMap<String, f64>,
    pub taints: Vec<Taint>,
    pub metrics: BTreeMap<String, BTreeMap<String, serde_json::Value>>,
    pub checks: Vec<CheckRow>,
    pub files: Vec<FileRecord>,
}

impl RunManifest {
    pub fn is_tainted(&self) -> bool {
        !self.taints.is_empty()
    }
}
