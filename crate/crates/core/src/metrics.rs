//! Pixel accuracy, output post-processing and the method comparison table.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_TOLERANCE: f64 = 0.01;

/// Per-image similarity scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub tolerance: f64,
    pub similar_pixels: Vec<usize>,
    pub per_sample: Vec<f64>,
    pub mean: f64,
}

/// Counts pixels with `|xhat - x| <= tol` and returns `(count, percent)`.
pub fn accuracy(x: &[f64], xhat: &[f64], tol: f64) -> Result<(usize, f64)> {
    if x.len() != xhat.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            actual: xhat.len(),
        });
    }
    if x.is_empty() {
        return Ok((0, 100.0));
    }
    let similar = x.iter().zip(xhat).filter(|(a, b)| (*a - *b).abs() <= tol).count();
    Ok((similar, 100.0 * similar as f64 / x.len() as f64))
}

pub fn accuracy_report(truth: &[Vec<f64>], recon: &[Vec<f64>], tol: f64) -> Result<AccuracyReport> {
    if truth.len() != recon.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            actual: recon.len(),
        });
    }
    let mut similar_pixels = Vec::with_capacity(truth.len());
    let mut per_sample = Vec::with_capacity(truth.len());
    for (x, xhat) in truth.iter().zip(recon) {
        let (sp, s) = accuracy(x, xhat, tol)?;
        similar_pixels.push(sp);
        per_sample.push(s);
    }
    let mean = if per_sample.is_empty() {
        0.0
    } else {
        per_sample.iter().sum::<f64>() / per_sample.len() as f64
    };
    Ok(AccuracyReport {
        tolerance: tol,
        similar_pixels,
        per_sample,
        mean,
    })
}

/// Snaps values `<= 0.01` to 0 and `>= 0.99` to 1, leaving the rest.
pub fn threshold_pixels(xhat: &[f64]) -> Vec<f64> {
    xhat.iter()
        .map(|&v| {
            if v <= 0.01 {
                0.0
            } else if v >= 0.99 {
                1.0
            } else {
                v
            }
        })
        .collect()
}

/// Hard threshold at 0.5 (`>= 0.5` maps to 1).
pub fn binarize_amplitudes(xhat: &[f64]) -> Vec<f64> {
    xhat.iter().map(|&v| if v >= 0.5 { 1.0 } else { 0.0 }).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PostProcess {
    #[default]
    Clamp,
    Binarize,
    None,
}

impl PostProcess {
    pub fn apply(self, xhat: &[f64]) -> Vec<f64> {
        match self {
            PostProcess::Clamp => threshold_pixels(xhat),
            PostProcess::Binarize => binarize_amplitudes(xhat),
            PostProcess::None => xhat.to_vec(),
        }
    }
}

/// One row of the method comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub method: String,
    pub accuracy_percent: f64,
    pub wall_time_s: f64,
    pub matrix_size: String,
    pub final_loss: f64,
}

pub fn write_comparison_csv(rows: &[ComparisonRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(["method", "accuracy_percent", "wall_time_s", "matrix_size", "final_loss"])
        .map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.write_record([
            r.method.clone(),
            format!("{:.2}", r.accuracy_percent),
            format!("{:.2}", r.wall_time_s),
            r.matrix_size.clone(),
            r.final_loss.to_string(),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn format_comparison(rows: &[ComparisonRow]) -> String {
    let header = ["Method", "Accuracy", "Time (s)", "Matrix Size", "Final Loss"];
    let cells: Vec<[String; 5]> = rows
        .iter()
        .map(|r| {
            [
                r.method.clone(),
                format!("{:.2}%", r.accuracy_percent),
                format!("{:.2}", r.wall_time_s),
                r.matrix_size.clone(),
                format!("{:.6}", r.final_loss),
            ]
        })
        .collect();
    let mut widths = header.map(str::len);
    for row in &cells {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.len());
        }
    }
    let mut out = String::new();
    let line = |out: &mut String, row: &[&str]| {
        let parts: Vec<String> = row.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        let _ = writeln!(out, "| {} |", parts.join(" | "));
    };
    line(&mut out, &header);
    let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
    let _ = writeln!(out, "|-{}-|", rule.join("-|-"));
    for row in &cells {
        let refs: Vec<&str> = row.iter().map(String::as_str).collect();
        line(&mut out, &refs);
    }
    out
}

pub(crate) fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::malformed(path, format!("{other:?}")),
    }
}
