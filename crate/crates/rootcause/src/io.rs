//! On-disk formats.
//!
//! CSV files are comma-separated with a header row and `\n` line endings;
//! real numbers are written with 17 significant digits so they parse back to
//! the same bits. JSON documents carry a `format_version` field.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rootcause_core::extraction::PartialStep;
use rootcause_core::sem::{ErrorDist, SemModel};
use rootcause_core::shapley::ShapleyReport;
use rootcause_core::synth::Dataset;
use rootcause_core::Matrix;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

/// Name of the binary target column in dataset files.
pub const TARGET_COLUMN: &str = "D";

pub fn format_real(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::format(path, e))?;
    text.push('\n');
    write_text(path, &text)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::format(path, e))?;
    match value
        .get("format_version")
        .and_then(serde_json::Value::as_u64)
    {
        Some(v) if v == u64::from(FORMAT_VERSION) => {}
        Some(v) => {
            return Err(Error::format(
                path,
                format!("unsupported format_version {v}"),
            ))
        }
        None => return Err(Error::format(path, "missing format_version")),
    }
    serde_json::from_value(value).map_err(|e| Error::format(path, e))
}

/// CSV text with a header row and one line per row of `columns`.
///
/// Every column is rendered with `cell(column, row)`.
fn csv_text(
    header: &[String],
    nrows: usize,
    mut cell: impl FnMut(usize, usize) -> String,
) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for r in 0..nrows {
        for c in 0..header.len() {
            if c > 0 {
                out.push(',');
            }
            out.push_str(&cell(c, r));
        }
        out.push('\n');
    }
    out
}

fn check_header_names(names: &[String]) -> Result<()> {
    if let Some(bad) = names
        .iter()
        .find(|n| n.is_empty() || n.contains([',', '"', '\n', '\r']))
    {
        return Err(Error::Usage(format!(
            "column name {bad:?} cannot be written to CSV"
        )));
    }
    Ok(())
}

/// Writes a numeric matrix with the given column names.
pub fn write_matrix(path: &Path, names: &[String], m: &Matrix) -> Result<()> {
    check_header_names(names)?;
    write_text(
        path,
        &csv_text(names, m.nrows(), |c, r| format_real(m.get(r, c))),
    )
}

/// Header and cells of a CSV file, all parsed as reals.
pub fn read_matrix(path: &Path) -> Result<(Vec<String>, Matrix)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .map(str::to_owned)
        .collect();
    let mut columns = vec![Vec::new(); header.len()];
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        for (c, field) in record.iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| {
                Error::format(path, format!("row {}: '{field}' is not a number", line + 1))
            })?;
            columns[c].push(v);
        }
    }
    if columns.first().is_none_or(Vec::is_empty) {
        return Err(Error::format(path, "no data rows"));
    }
    let m = Matrix::from_columns(columns).map_err(|e| Error::format(path, e))?;
    Ok((header, m))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::format(path, format!("{other:?}")),
    }
}

/// Observed columns followed by the `D` column.
pub fn write_dataset(path: &Path, data: &Dataset) -> Result<()> {
    check_header_names(&data.column_names)?;
    let q = data.observed.ncols();
    let mut header = data.column_names.clone();
    header.push(TARGET_COLUMN.to_owned());
    let text = csv_text(&header, data.n(), |c, r| {
        if c < q {
            format_real(data.observed.get(r, c))
        } else {
            data.target[r].to_string()
        }
    });
    write_text(path, &text)
}

/// Observed data from a CSV file. A column named `target`, if present, is
/// split off and must hold only 0 and 1.
pub fn read_dataset(path: &Path, target: &str) -> Result<(Vec<String>, Matrix, Option<Vec<u8>>)> {
    let (header, m) = read_matrix(path)?;
    let Some(t) = header.iter().position(|h| h == target) else {
        return Ok((header, m, None));
    };
    let labels = m
        .col(t)
        .iter()
        .enumerate()
        .map(|(r, &v)| match v {
            0.0 => Ok(0),
            1.0 => Ok(1),
            _ => Err(Error::format(
                path,
                format!("row {}: target value {v} is not 0 or 1", r + 1),
            )),
        })
        .collect::<Result<Vec<u8>>>()?;
    let keep: Vec<usize> = (0..header.len()).filter(|&c| c != t).collect();
    let names = keep.iter().map(|&c| header[c].clone()).collect();
    Ok((names, m.select_columns(&keep), Some(labels)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorDistDoc {
    pub kind: String,
    pub params: Vec<f64>,
}

/// JSON form of a model. Matrices are dense and row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDoc {
    pub format_version: u32,
    pub q: usize,
    pub m: usize,
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
    pub error_dists: Vec<ErrorDistDoc>,
    pub target_weights: Vec<f64>,
    pub target_intercept: f64,
    pub names: Vec<String>,
}

fn row_major(m: &Matrix) -> Vec<f64> {
    (0..m.nrows()).flat_map(|r| m.row(r)).collect()
}

fn from_row_major(rows: usize, cols: usize, data: &[f64]) -> Option<Matrix> {
    if data.len() != rows * cols {
        return None;
    }
    let mut m = Matrix::zeros(rows, cols);
    for r in 0..rows {
        for c in 0..cols {
            m.set(r, c, data[r * cols + c]);
        }
    }
    Some(m)
}

impl ModelDoc {
    pub fn from_model(model: &SemModel) -> Self {
        ModelDoc {
            format_version: FORMAT_VERSION,
            q: model.q(),
            m: model.m(),
            beta: row_major(model.beta()),
            gamma: row_major(model.gamma()),
            error_dists: model
                .error_dists()
                .iter()
                .map(|d| ErrorDistDoc {
                    kind: d.kind().to_owned(),
                    params: d.params(),
                })
                .collect(),
            target_weights: model.target_weights().to_vec(),
            target_intercept: model.target_intercept(),
            names: model.names().to_vec(),
        }
    }

    pub fn to_model(&self) -> rootcause_core::Result<SemModel> {
        let shape = |what: &str| {
            rootcause_core::Error::InvalidModel(format!("{what} has the wrong length"))
        };
        let beta = from_row_major(self.q, self.q, &self.beta).ok_or_else(|| shape("beta"))?;
        let gamma = from_row_major(self.m, self.q, &self.gamma).ok_or_else(|| shape("gamma"))?;
        let dists = self
            .error_dists
            .iter()
            .map(|d| ErrorDist::from_kind(&d.kind, &d.params))
            .collect::<rootcause_core::Result<Vec<_>>>()?;
        SemModel::new(
            beta,
            gamma,
            dists,
            self.target_weights.clone(),
            self.target_intercept,
            self.names.clone(),
        )
    }
}

pub fn write_model(path: &Path, model: &SemModel) -> Result<()> {
    write_json(path, &ModelDoc::from_model(model))
}

pub fn read_model(path: &Path) -> Result<SemModel> {
    let doc: ModelDoc = read_json(path)?;
    Ok(doc.to_model()?)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartialStepDoc {
    pub target: usize,
    pub regressors: Vec<usize>,
}

impl From<&PartialStep> for PartialStepDoc {
    fn from(s: &PartialStep) -> Self {
        PartialStepDoc {
            target: s.target,
            regressors: s.regressors.clone(),
        }
    }
}

impl From<&PartialStepDoc> for PartialStep {
    fn from(s: &PartialStepDoc) -> Self {
        PartialStep {
            target: s.target,
            regressors: s.regressors.clone(),
        }
    }
}

/// Metadata written next to the extracted terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtractionDoc {
    pub format_version: u32,
    pub method: String,
    pub backend: String,
    pub alpha: f64,
    pub max_cond: Option<usize>,
    pub budget: usize,
    pub seed: u64,
    pub names: Vec<String>,
    /// File name of the extracted terms, relative to this document.
    pub estar: String,
    pub edges: Vec<(usize, usize)>,
    pub partial_log: Vec<PartialStepDoc>,
    pub max_cond_reached: usize,
    pub budget_exceeded: bool,
    pub candidates: usize,
    pub tests: usize,
    pub standardization_means: Vec<f64>,
    pub standardization_scales: Vec<f64>,
}

/// Edge list with variable names, one edge per line.
pub fn write_edges(path: &Path, names: &[String], edges: &[(usize, usize)]) -> Result<()> {
    let mut text = String::from("from,to\n");
    for &(a, b) in edges {
        writeln!(text, "{},{}", names[a], names[b]).expect("writing to a string");
    }
    write_text(path, &text)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticDoc {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub converged: bool,
    pub iterations: usize,
    pub ridge: f64,
}

/// Metadata written next to the per-sample attribution table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportDoc {
    pub format_version: u32,
    pub names: Vec<String>,
    pub delta: LogisticDoc,
    pub method_per_var: Vec<String>,
    pub neighborhoods: Vec<Vec<usize>>,
    pub mc_threshold: usize,
    pub mc_samples: usize,
    pub seed: u64,
    pub estimator: String,
    pub knn_k: Option<usize>,
    pub values: String,
}

impl ReportDoc {
    pub fn new(report: &ShapleyReport, names: &[String], values_file: &str) -> Self {
        let cfg = &report.config;
        ReportDoc {
            format_version: FORMAT_VERSION,
            names: names.to_vec(),
            delta: LogisticDoc {
                coefficients: report.delta.coefficients.clone(),
                intercept: report.delta.intercept,
                converged: report.delta.converged,
                iterations: report.delta.iterations,
                ridge: report.delta.ridge,
            },
            method_per_var: report
                .method_per_var
                .iter()
                .map(|m| m.as_str().to_owned())
                .collect(),
            neighborhoods: report.neighborhoods.clone(),
            mc_threshold: cfg.mc_threshold,
            mc_samples: cfg.mc_samples,
            seed: cfg.seed,
            estimator: cfg.estimator.name().to_owned(),
            knn_k: match cfg.estimator {
                rootcause_core::shapley::EstimatorKind::Knn(k) => k.k,
                rootcause_core::shapley::EstimatorKind::Linear => None,
            },
            values: values_file.to_owned(),
        }
    }
}

/// One row per sample: `S_<name>` values, then `rank_<k>` (variable names by
/// decreasing value), then `root_<name>` flags (1 when the value is positive).
pub fn write_report(path: &Path, names: &[String], report: &ShapleyReport) -> Result<()> {
    check_header_names(names)?;
    let q = names.len();
    let mut header: Vec<String> = names.iter().map(|n| format!("S_{n}")).collect();
    header.extend((1..=q).map(|k| format!("rank_{k}")));
    header.extend(names.iter().map(|n| format!("root_{n}")));
    let text = csv_text(&header, report.values.nrows(), |c, r| {
        if c < q {
            format_real(report.values.get(r, c))
        } else if c < 2 * q {
            names[report.rankings[r][c - q]].clone()
        } else {
            u8::from(report.root_cause_mask[r][c - 2 * q]).to_string()
        }
    });
    write_text(path, &text)
}
