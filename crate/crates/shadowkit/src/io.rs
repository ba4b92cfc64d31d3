//! Deterministic artifact writing: one CSV table, one JSON structure file, one manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::ExperimentConfig;
use crate::experiments::Outcome;
use crate::Result;

pub const MANIFEST: &str = "manifest.json";

/// Rows to CSV bytes, header from the field names.
pub fn csv_bytes<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    w.into_inner().map_err(|e| crate::RunError::Io(e.into_error()))
}

/// Pretty JSON with a trailing newline.
pub fn json_bytes<T: Serialize + ?Sized>(v: &T) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(v)?;
    out.push(b'\n');
    Ok(out)
}

pub fn table_path(cfg: &ExperimentConfig) -> PathBuf {
    Path::new(&cfg.out).join(format!("{}.csv", cfg.experiment))
}

pub fn structures_path(cfg: &ExperimentConfig) -> PathBuf {
    Path::new(&cfg.out).join(format!("{}.json", cfg.experiment))
}

pub fn manifest_path(cfg: &ExperimentConfig) -> PathBuf {
    Path::new(&cfg.out).join(MANIFEST)
}

/// Config echo, versions, constants, checks and the artifact names.
pub fn manifest(cfg: &ExperimentConfig, outcome: &Outcome) -> Value {
    let name = |p: PathBuf| p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    json!({
        "tool": "shadowkit",
        "version": env!("CARGO_PKG_VERSION"),
        "core_version": shadowkit_core::VERSION,
        "experiment": cfg.experiment,
        "config": cfg,
        "constants": outcome.constants,
        "checks": outcome.checks,
        "pass": outcome.pass(),
        "files": [name(table_path(cfg)), name(structures_path(cfg))],
    })
}

/// Writes the three artifacts and returns their paths.
pub fn write_outcome(cfg: &ExperimentConfig, outcome: &Outcome) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(&cfg.out)?;
    let files = [
        (table_path(cfg), outcome.table.clone()),
        (structures_path(cfg), json_bytes(&outcome.structures)?),
        (manifest_path(cfg), json_bytes(&manifest(cfg, outcome))?),
    ];
    for (path, bytes) in &files {
        fs::write(path, bytes)?;
    }
    Ok(files.into_iter().map(|(p, _)| p).collect())
}

/// Error document for a run that never got to its checks.
pub fn write_error(dir: &Path, err: &crate::RunError) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join("error.json");
    fs::write(&path, json_bytes(&err.to_json())?)?;
    Ok(path)
}
