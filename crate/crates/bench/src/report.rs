//! Flat-file outputs. Every file is written to a temporary sibling and
//! renamed into place.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::BenchmarkConfig;
use crate::error::{BenchError, Result};
use crate::runner::BenchmarkResult;

pub const TABLE_FILE: &str = "table2.csv";
pub const PER_SEED_FILE: &str = "per_seed.csv";
pub const FAILURES_FILE: &str = "failures.csv";
pub const LOCK_FILE: &str = "config.lock.json";

/// Write `bytes` to `path` atomically.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| BenchError::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| BenchError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| BenchError::io(path, e))?;
    tmp.persist(path).map_err(|e| BenchError::io(path, e.error))?;
    Ok(())
}

pub fn csv_bytes<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| BenchError::Input(e.to_string()))?;
    }
    w.into_inner().map_err(|e| BenchError::Input(e.to_string()))
}

pub fn lock_bytes(cfg: &BenchmarkConfig) -> Result<Vec<u8>> {
    let mut text = serde_json::to_string_pretty(&cfg.lock()).map_err(|e| BenchError::Config(e.to_string()))?;
    text.push('\n');
    Ok(text.into_bytes())
}

/// Write the aggregate table, per-seed records, failures and locked config
/// into `outdir`. Returns the written paths.
pub fn emit_reports(result: &BenchmarkResult, outdir: &Path) -> Result<Vec<PathBuf>> {
    if result.records.is_empty() {
        return Err(BenchError::Input("no successful seeds to report".into()));
    }
    let files = [
        (TABLE_FILE, csv_bytes(&result.summary)?),
        (PER_SEED_FILE, csv_bytes(&result.records)?),
        (FAILURES_FILE, csv_bytes(&result.failures)?),
        (LOCK_FILE, lock_bytes(&result.config)?),
    ];
    let mut written = Vec::new();
    for (name, bytes) in files {
        let path = outdir.join(name);
        write_atomic(&path, &bytes)?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub/x.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"two");
        assert_eq!(fs::read_dir(p.parent().unwrap()).unwrap().count(), 1);
    }
}
