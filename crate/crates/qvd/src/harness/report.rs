//! Result persistence: CSV/JSON emitters with fixed headers and full
//! double-precision formatting, written through staged atomic renames.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{QvdError, Result};
use crate::expansion::{OrderFit, PredictedError};
use crate::qcore::MatrixJson;
use crate::qnno::CurveRow;

/// 17 significant digits: enough to round-trip any f64.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Write via a staged temporary file in the same directory, then rename into
/// place so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().ok_or_else(|| {
        QvdError::Io(std::io::Error::other(format!(
            "no parent directory for {}",
            path.display()
        )))
    })?;
    let staged = dir.join(format!(
        ".{}.staged",
        path.file_name()
            .and_then(|n| n.to_str())
            .unwrap_or("artifact")
    ));
    std::fs::write(&staged, bytes)?;
    std::fs::rename(&staged, path)?;
    Ok(())
}

pub fn to_json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(QvdError::Json)?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// One row of the closed-form vs. quadrature moment comparison.
#[derive(Debug, Clone)]
pub struct MomentRow {
    pub alpha: Vec<usize>,
    pub delta: f64,
    pub lambda: f64,
    pub n: usize,
    pub exact: f64,
    pub paper: f64,
    pub quad_err: f64,
}

pub fn moments_csv(rows: &[MomentRow]) -> String {
    let mut out = String::from("alpha,delta,lambda,n,exact,paper,abs_diff,quad_err\n");
    for r in rows {
        let alpha = r
            .alpha
            .iter()
            .map(|a| a.to_string())
            .collect::<Vec<_>>()
            .join("-");
        let abs_diff = (r.exact - r.paper).abs();
        out.push_str(&format!(
            "{alpha},{},{},{},{},{},{},{}\n",
            fmt_f64(r.delta),
            fmt_f64(r.lambda),
            r.n,
            fmt_f64(r.exact),
            fmt_f64(r.paper),
            fmt_f64(abs_diff),
            fmt_f64(r.quad_err),
        ));
    }
    out
}

pub fn error_curve_csv(rows: &[CurveRow]) -> String {
    let mut out = String::from("n,lambda,error_trace_norm,raw_weight_sum\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.n,
            fmt_f64(r.lambda),
            fmt_f64(r.error_trace_norm),
            fmt_f64(r.raw_weight_sum),
        ));
    }
    out
}

/// Romberg table rows: k, column l, lattice order n = 2^k·n0, error.
pub fn romberg_csv(n0: usize, errors: &[Vec<f64>]) -> String {
    let mut out = String::from("k,l,n,error\n");
    for (k, row) in errors.iter().enumerate() {
        let n = n0 << k;
        for (l, err) in row.iter().enumerate() {
            out.push_str(&format!("{k},{l},{n},{}\n", fmt_f64(*err)));
        }
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct ExpansionTermJson {
    pub kind: String,
    pub j: usize,
    pub exponent: f64,
    pub norm: f64,
    pub matrix: MatrixJson,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExpansionReport {
    pub n: usize,
    pub lambda: f64,
    pub terms: Vec<ExpansionTermJson>,
    pub predicted_norm: f64,
    pub measured_error: f64,
}

impl ExpansionReport {
    pub fn from_prediction(
        n: usize,
        lambda: f64,
        prediction: &PredictedError,
        measured_error: f64,
    ) -> Self {
        let terms = prediction
            .terms
            .iter()
            .map(|t| ExpansionTermJson {
                kind: t.kind.clone(),
                j: t.j,
                exponent: t.exponent,
                norm: t.norm,
                matrix: t.matrix.clone(),
            })
            .collect();
        ExpansionReport {
            n,
            lambda,
            terms,
            predicted_norm: crate::qcore::trace_norm(&prediction.partial_sum),
            measured_error,
        }
    }

    pub fn flat_csv(&self) -> String {
        let mut out = String::from("kind,j,exponent,norm\n");
        for t in &self.terms {
            out.push_str(&format!(
                "{},{},{},{}\n",
                t.kind,
                t.j,
                fmt_f64(t.exponent),
                fmt_f64(t.norm)
            ));
        }
        out
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OrderFitReport {
    pub skipped: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slope: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub intercept: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dropped: Option<usize>,
}

impl OrderFitReport {
    pub fn fitted(fit: &OrderFit) -> Self {
        OrderFitReport {
            skipped: false,
            warning: None,
            slope: Some(fit.slope),
            intercept: Some(fit.intercept),
            r2: Some(fit.r2),
            dropped: Some(fit.dropped),
        }
    }

    pub fn skipped(reason: &str) -> Self {
        OrderFitReport {
            skipped: true,
            warning: Some(reason.to_string()),
            slope: None,
            intercept: None,
            r2: None,
            dropped: None,
        }
    }
}
