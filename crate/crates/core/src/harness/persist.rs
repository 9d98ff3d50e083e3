use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Provenance written next to every CSV as `<stem>.meta.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub command: String,
    /// Full effective configuration, defaults included.
    pub config: serde_json::Value,
    pub seed: u64,
    pub git_describe: String,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
    pub columns: Vec<String>,
    pub rows: usize,
}

impl RunMeta {
    pub fn new(command: &str, config: serde_json::Value, seed: u64) -> Self {
        RunMeta {
            command: command.to_string(),
            config,
            seed,
            git_describe: git_describe(),
            timestamp: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
            columns: Vec::new(),
            rows: 0,
        }
    }
}

/// `git describe --always --dirty` of the source tree this crate was built
/// from, or `"unknown"` when that is not a git work tree.
pub fn git_describe() -> String {
    Command::new("git")
        .arg("-C")
        .arg(env!("CARGO_MANIFEST_DIR"))
        .args(["describe", "--always", "--dirty"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| "unknown".to_string())
}

pub fn sidecar_path(csv: &Path) -> PathBuf {
    let stem = csv.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    csv.with_file_name(format!("{stem}.meta.json"))
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> Error + '_ {
    move |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes `rows` as CSV (header from the row type's field names) plus the
/// JSON sidecar. Returns the sidecar path.
pub fn persist_results<T: Serialize>(rows: &[T], path: &Path, meta: &RunMeta) -> Result<PathBuf> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(csv_err(path))?;
    }
    let body = w.into_inner().map_err(|e| io_err(path)(e.into_error()))?;
    std::fs::write(path, &body).map_err(io_err(path))?;

    let mut meta = meta.clone();
    meta.columns = String::from_utf8_lossy(&body)
        .lines()
        .next()
        .map(|h| h.split(',').map(str::to_string).collect())
        .unwrap_or_default();
    meta.rows = rows.len();
    let side = sidecar_path(path);
    write_json(&side, &meta)?;
    Ok(side)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = File::create(path).map_err(io_err(path))?;
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n").map_err(io_err(path))
}

pub fn read_results<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    r.deserialize().map(|row| row.map_err(csv_err(path))).collect()
}

pub fn read_meta(path: &Path) -> Result<RunMeta> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    Ok(serde_json::from_str(&text)?)
}
