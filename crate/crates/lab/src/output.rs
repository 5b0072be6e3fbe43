//! Run directories. Files are staged in `<name>.partial/` and the directory
//! is renamed into place only after `manifest.json` has been written, so an
//! interrupted run never replaces a completed one.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::LabError;

#[derive(Debug, Clone, Serialize)]
pub struct FileRecord {
    pub path: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Debug)]
pub struct RunWriter {
    final_dir: PathBuf,
    staging: PathBuf,
    force: bool,
    files: Vec<FileRecord>,
}

impl RunWriter {
    /// Refuses an existing `out/name` unless `force`. A stale staging
    /// directory left by an interrupted run is discarded.
    pub fn create(out: &Path, name: &str, force: bool) -> Result<Self, LabError> {
        let final_dir = out.join(name);
        if final_dir.exists() && !force {
            return Err(LabError::Config {
                field: "out".into(),
                reason: format!(
                    "{} already exists; pass --force to replace it",
                    final_dir.display()
                ),
            });
        }
        let staging = out.join(format!("{name}.partial"));
        if staging.exists() {
            fs::remove_dir_all(&staging).map_err(|e| LabError::io(&staging, e))?;
        }
        fs::create_dir_all(&staging).map_err(|e| LabError::io(&staging, e))?;
        Ok(Self {
            final_dir,
            staging,
            force,
            files: Vec::new(),
        })
    }

    pub fn staging_dir(&self) -> &Path {
        &self.staging
    }

    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<FileRecord, LabError> {
        let path = self.staging.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| LabError::io(parent, e))?;
        }
        fs::write(&path, bytes).map_err(|e| LabError::io(&path, e))?;
        let record = FileRecord {
            path: rel.to_string(),
            bytes: bytes.len(),
            sha256: hex::encode(Sha256::digest(bytes)),
        };
        self.files.push(record.clone());
        Ok(record)
    }

    /// Writes `manifest.json` (with the file list added) and moves the run
    /// into place.
    pub fn finish(self, mut manifest: serde_json::Value) -> Result<PathBuf, LabError> {
        if let Some(obj) = manifest.as_object_mut() {
            obj.insert(
                "files".into(),
                serde_json::to_value(&self.files).expect("file records serialise"),
            );
        }
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serialises");
        let path = self.staging.join("manifest.json");
        fs::write(&path, text + "\n").map_err(|e| LabError::io(&path, e))?;
        if self.final_dir.exists() {
            if !self.force {
                return Err(LabError::Config {
                    field: "out".into(),
                    reason: format!("{} appeared during the run", self.final_dir.display()),
                });
            }
            fs::remove_dir_all(&self.final_dir).map_err(|e| LabError::io(&self.final_dir, e))?;
        }
        fs::rename(&self.staging, &self.final_dir).map_err(|e| LabError::io(&self.final_dir, e))?;
        Ok(self.final_dir)
    }
}

/// Number formatting for CSV cells: plain decimals in the usual range,
/// exponent notation otherwise. Both forms round-trip.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-4..1e15).contains(&a) || !x.is_finite() {
        x.to_string()
    } else {
        format!("{x:e}")
    }
}

/// Minimal CSV table; every cell here is numeric or a bare token, so no
/// quoting is needed.
#[derive(Debug, Default)]
pub struct Table {
    text: String,
}

impl Table {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        let mut t = Self::default();
        t.row(header);
        t
    }

    pub fn row<S: AsRef<str>>(&mut self, cells: &[S]) {
        let line: Vec<&str> = cells.iter().map(|c| c.as_ref()).collect();
        self.text.push_str(&line.join(","));
        self.text.push_str("\r\n");
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.text.into_bytes()
    }
}
