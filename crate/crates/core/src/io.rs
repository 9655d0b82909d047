//! Artifact formats: density matrices, probability tables, verdict records
//! and trade-off curves.
//!
//! Matrices and tables are JSON. Floats are written with the shortest
//! representation that parses back to the same bits, so every file written
//! here reads back exactly.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::classical::JointPmf;
use crate::error::{Error, Result};
use crate::qmath::{c64, CMatrix, SystemLayout};
use crate::states::DensityMatrix;
use crate::verdict::{BetaRun, GraphKind, Verdict};

pub const SCHEMA_VERSION: u32 = 1;

/// On-disk density matrix: row-major nested real and imaginary parts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixFile {
    pub dims: Vec<usize>,
    pub labels: Vec<String>,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl MatrixFile {
    pub fn from_state(rho: &DensityMatrix) -> Self {
        let m = rho.mat();
        let n = m.nrows();
        let rows = |f: fn(&num_complex::Complex64) -> f64| -> Vec<Vec<f64>> {
            (0..n).map(|i| (0..n).map(|j| f(&m[(i, j)])).collect()).collect()
        };
        Self {
            dims: rho.layout().dims(),
            labels: rho.layout().labels().iter().map(|s| s.to_string()).collect(),
            re: rows(|z| z.re),
            im: rows(|z| z.im),
        }
    }

    pub fn to_state(&self) -> Result<DensityMatrix> {
        if self.dims.len() != self.labels.len() {
            return Err(Error::InvalidLayout(format!(
                "{} dims but {} labels",
                self.dims.len(),
                self.labels.len()
            )));
        }
        let layout = SystemLayout::new(self.labels.iter().cloned().zip(self.dims.iter().copied()))?;
        let n = layout.total_dim();
        let shape_ok = |a: &Vec<Vec<f64>>| a.len() == n && a.iter().all(|r| r.len() == n);
        if !shape_ok(&self.re) || !shape_ok(&self.im) {
            return Err(Error::DimensionMismatch(format!("re/im must both be {n}x{n}")));
        }
        let mut m = CMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = c64(self.re[i][j], self.im[i][j]);
            }
        }
        DensityMatrix::new(m, layout)
    }
}

/// On-disk probability table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PmfFile {
    pub supports: Vec<usize>,
    pub probs: Vec<f64>,
}

impl PmfFile {
    pub fn from_pmf(p: &JointPmf) -> Self {
        Self {
            supports: p.supports().to_vec(),
            probs: p.probs().to_vec(),
        }
    }

    pub fn to_pmf(&self) -> Result<JointPmf> {
        JointPmf::new(self.supports.clone(), self.probs.clone())
    }
}

/// Verdict summary written by `infer` and stored per grid cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictRecord {
    pub verdict: GraphKind,
    pub min_entropy_z: Option<f64>,
    pub theta: f64,
    pub threshold: f64,
    pub qualifying_betas: Vec<f64>,
    pub per_beta: Vec<BetaRun>,
}

impl From<&Verdict> for VerdictRecord {
    fn from(v: &Verdict) -> Self {
        Self {
            verdict: v.kind,
            min_entropy_z: v.min_entropy_z,
            theta: v.theta,
            threshold: v.threshold,
            qualifying_betas: v.qualifying.iter().map(|&i| v.per_beta[i].beta).collect(),
            per_beta: v.per_beta.clone(),
        }
    }
}

/// A record wrapped with the schema version, as written to disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Versioned<T> {
    pub schema_version: u32,
    #[serde(flatten)]
    pub body: T,
}

impl<T> Versioned<T> {
    pub fn new(body: T) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            body,
        }
    }
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn format_err(path: &Path, message: impl ToString) -> Error {
    Error::Format {
        path: path.display().to_string(),
        message: message.to_string(),
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("plain data serializes");
    s.push('\n');
    s
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, to_json(value)).map_err(|e| io_err(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| format_err(path, e))
}

pub fn write_state(path: &Path, rho: &DensityMatrix) -> Result<()> {
    write_json(path, &MatrixFile::from_state(rho))
}

/// Reads and validates a density matrix. Files that parse but do not hold
/// a valid state are reported as malformed.
pub fn read_state(path: &Path) -> Result<DensityMatrix> {
    let f: MatrixFile = read_json(path)?;
    f.to_state().map_err(|e| format_err(path, e))
}

pub fn write_pmf(path: &Path, p: &JointPmf) -> Result<()> {
    write_json(path, &PmfFile::from_pmf(p))
}

pub fn read_pmf(path: &Path) -> Result<JointPmf> {
    let f: PmfFile = read_json(path)?;
    f.to_pmf().map_err(|e| format_err(path, e))
}

/// Either kind of input accepted by `infer`.
#[derive(Debug, Clone)]
pub enum Input {
    State(DensityMatrix),
    Pmf(JointPmf),
}

/// Reads a matrix file or a PMF file, telling them apart by their fields.
pub fn read_input(path: &Path) -> Result<Input> {
    let v: serde_json::Value = read_json(path)?;
    if v.get("re").is_some() {
        let f: MatrixFile = serde_json::from_value(v).map_err(|e| format_err(path, e))?;
        f.to_state().map(Input::State).map_err(|e| format_err(path, e))
    } else if v.get("probs").is_some() {
        let f: PmfFile = serde_json::from_value(v).map_err(|e| format_err(path, e))?;
        f.to_pmf().map(Input::Pmf).map_err(|e| format_err(path, e))
    } else {
        Err(format_err(path, "neither a matrix file (re/im) nor a PMF file (probs)"))
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CurveRow {
    beta: f64,
    i_q: f64,
    s_z: f64,
}

pub fn curve_csv(runs: &[BetaRun]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in runs {
        w.serialize(CurveRow {
            beta: r.beta,
            i_q: r.cmi,
            s_z: r.entropy_z,
        })
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}

pub fn write_curve(path: &Path, runs: &[BetaRun]) -> Result<()> {
    fs::write(path, curve_csv(runs)).map_err(|e| io_err(path, e))
}

/// Reads (β, I_Q, S(Z)) rows back; restart indices are not stored.
pub fn read_curve(path: &Path) -> Result<Vec<BetaRun>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => io_err(path, io),
        other => format_err(path, format!("{other:?}")),
    })?;
    r.deserialize::<CurveRow>()
        .map(|row| {
            let row = row.map_err(|e| format_err(path, e))?;
            Ok(BetaRun {
                beta: row.beta,
                restart: 0,
                cmi: row.i_q,
                entropy_z: row.s_z,
            })
        })
        .collect()
}
