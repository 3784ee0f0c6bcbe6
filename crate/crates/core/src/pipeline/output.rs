//! Stage outputs: atomic writes, the content-hash manifest and the run
//! metadata sidecar.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::PipelineError;

pub const MANIFEST: &str = "MANIFEST.json";
pub const RUN_META: &str = "run_meta.json";

#[derive(Debug, Default, Serialize, Deserialize, PartialEq, Eq)]
pub struct Manifest {
    /// Relative path → SHA-256 of the content.
    pub files: BTreeMap<String, String>,
}

impl Manifest {
    pub fn load(dir: &Path) -> Result<Manifest, PipelineError> {
        let path = dir.join(MANIFEST);
        if !path.exists() {
            return Ok(Manifest::default());
        }
        let text = fs::read_to_string(&path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), PipelineError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let file_name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = path.with_file_name(format!(".{file_name}.tmp-{}", std::process::id()));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Collects a stage's files, then writes them and refreshes the manifest.
#[derive(Debug)]
pub struct StageWriter {
    dir: PathBuf,
    stage: &'static str,
    files: BTreeMap<String, Vec<u8>>,
}

impl StageWriter {
    pub fn new(dir: &Path, stage: &'static str) -> Self {
        StageWriter {
            dir: dir.to_path_buf(),
            stage,
            files: BTreeMap::new(),
        }
    }

    pub fn add(&mut self, rel: impl Into<String>, bytes: Vec<u8>) {
        self.files.insert(rel.into(), bytes);
    }

    pub fn add_json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<(), PipelineError> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.add(rel, bytes);
        Ok(())
    }

    pub fn add_csv<T: Serialize>(&mut self, rel: &str, rows: &[T], header: &[&str]) -> Result<(), PipelineError> {
        self.add(rel, csv_bytes(rows, header)?);
        Ok(())
    }

    pub fn commit(self) -> Result<Vec<String>, PipelineError> {
        fs::create_dir_all(&self.dir)?;
        let mut manifest = Manifest::load(&self.dir)?;
        let mut written = Vec::new();
        for (rel, bytes) in &self.files {
            write_atomic(&self.dir.join(rel), bytes)?;
            manifest.files.insert(rel.clone(), sha256_hex(bytes));
            written.push(rel.clone());
        }
        let mut mbytes = serde_json::to_vec_pretty(&manifest)?;
        mbytes.push(b'\n');
        write_atomic(&self.dir.join(MANIFEST), &mbytes)?;
        record_run(&self.dir, self.stage)?;
        Ok(written)
    }
}

/// Serialize rows as RFC 4180 CSV with a header, even when there are no
/// rows.
pub fn csv_bytes<T: Serialize>(rows: &[T], header: &[&str]) -> Result<Vec<u8>, PipelineError> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .terminator(csv::Terminator::CRLF)
        .from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner()
        .map_err(|e| PipelineError::Io(std::io::Error::other(e.to_string())))
}

pub fn read_csv<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>, PipelineError> {
    if !path.exists() {
        return Err(PipelineError::MissingInput(path.display().to_string()));
    }
    let mut r = csv::Reader::from_path(path)?;
    let rows = r.deserialize().collect::<Result<Vec<T>, _>>()?;
    Ok(rows)
}

/// Timestamps live only in this sidecar, never in the data files.
fn record_run(dir: &Path, stage: &str) -> Result<(), PipelineError> {
    let path = dir.join(RUN_META);
    let mut meta: BTreeMap<String, serde_json::Value> = fs::read_to_string(&path)
        .ok()
        .and_then(|t| serde_json::from_str(&t).ok())
        .unwrap_or_default();
    let now = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or_default();
    meta.insert(
        stage.to_string(),
        serde_json::json!({"finished_at": now, "version": env!("CARGO_PKG_VERSION")}),
    );
    let mut bytes = serde_json::to_vec_pretty(&meta)?;
    bytes.push(b'\n');
    write_atomic(&path, &bytes)
}
