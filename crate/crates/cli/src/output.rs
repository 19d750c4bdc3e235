use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use nalgebra::DMatrix;
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Number of points of the uniform display grid on `[-1, 1]`.
pub const GRID_POINTS: usize = 201;

pub fn display_grid() -> Vec<f64> {
    (0..GRID_POINTS)
        .map(|i| -1.0 + 2.0 * i as f64 / (GRID_POINTS - 1) as f64)
        .collect()
}

/// Scientific notation with 17 significant digits.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("cannot create {}", root.display()))?;
        Ok(Self {
            root: root.to_path_buf(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    /// Writes a header and one row per column of `rows` (`ncols` records of
    /// `header.len()` values).
    pub fn write_csv(&self, name: &str, header: &[String], rows: &DMatrix<f64>) -> Result<PathBuf> {
        let path = self.path(name);
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_path(&path)
            .with_context(|| format!("cannot write {}", path.display()))?;
        w.write_record(header)?;
        for c in 0..rows.ncols() {
            w.write_record(rows.column(c).iter().map(|&v| fmt_float(v)))?;
        }
        w.flush()?;
        Ok(path)
    }

    pub fn write_records(
        &self,
        name: &str,
        header: &[String],
        records: &[Vec<String>],
    ) -> Result<PathBuf> {
        let path = self.path(name);
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_path(&path)
            .with_context(|| format!("cannot write {}", path.display()))?;
        w.write_record(header)?;
        for r in records {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(path)
    }

    pub fn write_json<S: Serialize>(&self, name: &str, value: &S) -> Result<PathBuf> {
        let path = self.path(name);
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))?;
        Ok(path)
    }

    /// Run metadata lives in its own file so data files stay reproducible.
    pub fn write_meta(&self, command: &str, config_text: &str) -> Result<PathBuf> {
        let timestamp = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let meta = Meta {
            command: command.into(),
            config_sha256: config_hash(config_text),
            timestamp_unix: timestamp,
            version: env!("CARGO_PKG_VERSION").into(),
        };
        self.write_json("meta.json", &meta)
    }
}

#[derive(Serialize)]
struct Meta {
    command: String,
    config_sha256: String,
    timestamp_unix: u64,
    version: String,
}

pub fn config_hash(text: &str) -> String {
    Sha256::digest(text.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

pub fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

/// Column names `{prefix}{channel}_d{derivative}` in stacking order.
pub fn stack_header(prefix: char, dim: usize, order: usize) -> Vec<String> {
    (0..order)
        .flat_map(|j| (0..dim).map(move |c| format!("{prefix}{c}_d{j}")))
        .collect()
}
