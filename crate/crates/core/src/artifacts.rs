//! JSON and CSV outputs.
//!
//! CSV files use `.` decimals, `{:.16e}` formatting (17 significant digits)
//! and LF line endings. The first column is always `t` or `epsilon`.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::jacobian::JacobianBasis;
use crate::lumping::{BisectionStep, EpsilonSearch, LumpingMatrix, RowOrigin, SearchOutcome, StaircasePoint};

#[derive(Debug, thiserror::Error)]
pub enum ArtifactError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> ArtifactError + '_ {
    move |source| ArtifactError::Io { path: path.to_path_buf(), source }
}

pub fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn rows_to_dmatrix(rows: &[Vec<f64>]) -> Option<DMatrix<f64>> {
    let ncols = rows.first()?.len();
    if ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
        return None;
    }
    Some(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisFile {
    pub dim: usize,
    pub seed: Option<u64>,
    pub size: usize,
    pub sample_points: Vec<Vec<f64>>,
    pub matrices: Vec<Vec<Vec<f64>>>,
}

impl BasisFile {
    pub fn new(basis: &JacobianBasis) -> Self {
        BasisFile {
            dim: basis.dim(),
            seed: basis.seed(),
            size: basis.len(),
            sample_points: basis.sample_points().iter().map(|p| p.iter().copied().collect()).collect(),
            matrices: basis.matrices().iter().map(matrix_rows).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LumpingFile {
    pub variables: Vec<String>,
    pub size: usize,
    pub epsilon: f64,
    pub epsilon_max: f64,
    pub epsilon_ratio: f64,
    pub observable_rank: usize,
    pub rows: Vec<Vec<f64>>,
    pub origins: Vec<RowOrigin>,
}

impl LumpingFile {
    pub fn new(variables: &[String], lumping: &LumpingMatrix, epsilon_max: f64) -> Self {
        LumpingFile {
            variables: variables.to_vec(),
            size: lumping.size(),
            epsilon: lumping.epsilon(),
            epsilon_max,
            epsilon_ratio: ratio(lumping.epsilon(), epsilon_max),
            observable_rank: lumping.observable_rank(),
            rows: matrix_rows(lumping.matrix()),
            origins: lumping.origins().to_vec(),
        }
    }
}

/// `ε/ε_max`, defined as 0 when `ε_max = 0`.
pub fn ratio(epsilon: f64, epsilon_max: f64) -> f64 {
    if epsilon_max > 0.0 {
        epsilon / epsilon_max
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchFile {
    pub ratio: f64,
    pub cutoff: usize,
    pub d_min: f64,
    pub epsilon: f64,
    pub epsilon_max: f64,
    pub epsilon_ratio: f64,
    pub size: usize,
    pub size_at_zero: usize,
    pub outcome: SearchOutcome,
    pub iterations: usize,
    pub history: Vec<BisectionStep>,
    pub rows: Vec<Vec<f64>>,
}

impl SearchFile {
    pub fn new(ratio_arg: f64, cutoff: usize, d_min: f64, search: &EpsilonSearch) -> Self {
        SearchFile {
            ratio: ratio_arg,
            cutoff,
            d_min,
            epsilon: search.epsilon,
            epsilon_max: search.epsilon_max,
            epsilon_ratio: ratio(search.epsilon, search.epsilon_max),
            size: search.lumping.size(),
            size_at_zero: search.size_at_zero,
            outcome: search.outcome,
            iterations: search.iterations,
            history: search.history.clone(),
            rows: matrix_rows(search.lumping.matrix()),
        }
    }
}

/// Serialize `value` as pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), ArtifactError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|source| ArtifactError::Json { path: path.to_path_buf(), source })?;
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, ArtifactError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| ArtifactError::Json { path: path.to_path_buf(), source })
}

/// Rows of a lumping matrix from a JSON file: either an object with a
/// `rows` field (as written by `lump`) or a bare array of rows.
pub fn read_lumping_rows(path: &Path) -> Result<DMatrix<f64>, ArtifactError> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Rows {
        Object { rows: Vec<Vec<f64>> },
        Bare(Vec<Vec<f64>>),
    }
    let rows = match read_json::<Rows>(path)? {
        Rows::Object { rows } | Rows::Bare(rows) => rows,
    };
    rows_to_dmatrix(&rows).ok_or_else(|| ArtifactError::Format {
        path: path.to_path_buf(),
        message: "lumping rows must be non-empty and of equal length".into(),
    })
}

/// Sample points from a JSON array of arrays.
pub fn read_points(path: &Path) -> Result<Vec<Vec<f64>>, ArtifactError> {
    read_json(path)
}

pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// CSV text with the given header and one row per time.
pub fn series_csv(first: &str, columns: &[String], times: &[f64], rows: &[DVector<f64>]) -> String {
    let mut out = String::new();
    out.push_str(first);
    for c in columns {
        out.push(',');
        out.push_str(c);
    }
    out.push('\n');
    for (t, row) in times.iter().zip(rows) {
        out.push_str(&format_float(*t));
        for v in row.iter() {
            out.push(',');
            out.push_str(&format_float(*v));
        }
        out.push('\n');
    }
    out
}

pub fn scalar_series_csv(column: &str, times: &[f64], values: &[f64]) -> String {
    let mut out = format!("t,{column}\n");
    for (t, v) in times.iter().zip(values) {
        let _ = writeln!(out, "{},{}", format_float(*t), format_float(*v));
    }
    out
}

pub fn staircase_csv(points: &[StaircasePoint], epsilon_max: f64) -> String {
    let mut out = String::from("epsilon,epsilon_over_epsilon_max,reduced_size\n");
    for p in points {
        let _ = writeln!(out, "{},{},{}", format_float(p.epsilon), format_float(ratio(p.epsilon, epsilon_max)), p.size);
    }
    out
}

pub fn write_text(path: &Path, text: &str) -> Result<(), ArtifactError> {
    fs::write(path, text).map_err(io_err(path))
}

pub fn ensure_dir(path: &Path) -> Result<(), ArtifactError> {
    fs::create_dir_all(path).map_err(io_err(path))
}
