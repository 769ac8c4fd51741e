//! Artifact files. Every experiment computes first and then hands its
//! tables to one `Artifacts` writer, so files are written serially.

use crate::error::CliError;
use hotlink_core::linalg::DMat;
use serde::Serialize;
use std::path::{Path, PathBuf};

pub struct Artifacts {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

/// Complex matrix in JSON form.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatrixRecord {
    pub basis: Vec<String>,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl MatrixRecord {
    pub fn new(m: &DMat, basis: Vec<String>) -> Self {
        let part = |f: fn(f64, f64) -> f64| -> Vec<Vec<f64>> {
            (0..m.nrows())
                .map(|i| (0..m.ncols()).map(|j| f(m[(i, j)].re, m[(i, j)].im)).collect())
                .collect()
        };
        Self {
            basis,
            re: part(|re, _| re),
            im: part(|_, im| im),
        }
    }
}

/// Computational basis labels for `n` qubits: `00`, `01`, ...
pub fn qubit_basis(n: usize) -> Vec<String> {
    (0..1usize << n).map(|k| format!("{k:0n$b}")).collect()
}

pub fn pauli_basis() -> Vec<String> {
    ["I", "X", "Y", "Z"].map(String::from).to_vec()
}

impl Artifacts {
    pub fn new(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn csv(&mut self, name: &str, headers: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<PathBuf, CliError> {
        let path = self.dir.join(name);
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(headers)?;
        for row in rows {
            if row.len() != headers.len() {
                return Err(CliError::Io(format!("{name}: row of {} values for {} columns", row.len(), headers.len())));
            }
            w.write_record(row.iter().map(f64::to_string))?;
        }
        w.flush()?;
        self.written.push(path.clone());
        Ok(path)
    }

    pub fn json(&mut self, name: &str, value: &impl Serialize) -> Result<PathBuf, CliError> {
        let path = self.dir.join(name);
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        std::fs::write(&path, text)?;
        self.written.push(path.clone());
        Ok(path)
    }

    pub fn into_paths(self) -> Vec<PathBuf> {
        self.written
    }
}
