//! Convergence reports and their CSV / JSON encodings.
//!
//! CSV layout: a `method,h,mse_error` header, one row per (method, h), then
//! one `# order,<method>,<fitted>,<residual>` line per fitted method. Floats
//! are written in scientific notation with 6 significant digits.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::drift::DriftReport;
use crate::harness::fit::OrderFit;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodErrors {
    pub method: String,
    pub h: Vec<f64>,
    /// Root-mean-square final-time error per step size.
    pub mse_error: Vec<f64>,
    pub fit: Option<OrderFit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyMetadata {
    pub model: String,
    pub params: Vec<(String, f64)>,
    pub x0: Vec<f64>,
    pub t_end: f64,
    pub h_ref: f64,
    pub paths: u64,
    pub seed: u64,
    pub truncation_k: u32,
    pub truncation_enabled: bool,
    pub projection_direction: String,
    pub newton_tol: f64,
    pub started_unix: u64,
    pub finished_unix: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub methods: Vec<MethodErrors>,
    pub metadata: StudyMetadata,
}

impl ConvergenceReport {
    pub fn method(&self, name: &str) -> Option<&MethodErrors> {
        self.methods.iter().find(|m| m.method == name)
    }

    pub fn order(&self, name: &str) -> Option<f64> {
        self.method(name).and_then(|m| m.fit).map(|f| f.order)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::Config(format!("unknown format '{other}' (csv|json)"))),
        }
    }
}

/// Scientific notation, 6 significant digits.
pub fn sci(v: f64) -> String {
    format!("{v:.5e}")
}

pub fn convergence_csv(report: &ConvergenceReport) -> String {
    let mut out = String::from("method,h,mse_error\n");
    for m in &report.methods {
        for (h, e) in m.h.iter().zip(&m.mse_error) {
            out.push_str(&format!("{},{},{}\n", m.method, sci(*h), sci(*e)));
        }
    }
    for m in &report.methods {
        if let Some(fit) = m.fit {
            out.push_str(&format!("# order,{},{},{}\n", m.method, sci(fit.order), sci(fit.residual)));
        }
    }
    out
}

pub fn convergence_json(report: &ConvergenceReport) -> Result<String> {
    serde_json::to_string_pretty(report).map_err(|e| Error::Format(e.to_string()))
}

pub fn parse_convergence_json(s: &str) -> Result<ConvergenceReport> {
    serde_json::from_str(s).map_err(|e| Error::Format(e.to_string()))
}

pub fn drift_csv(report: &DriftReport, stride: usize) -> String {
    let d = report.rows.first().map_or(0, |r| r.x.len());
    let l = report.labels.len();
    let mut out = String::from("step,t");
    for i in 1..=d {
        out.push_str(&format!(",x_{i}"));
    }
    for i in 1..=l {
        out.push_str(&format!(",inv_err_{i}"));
    }
    out.push_str(",combined_err\n");
    let stride = stride.max(1);
    let last = report.rows.len().saturating_sub(1);
    for (i, row) in report.rows.iter().enumerate() {
        if i % stride != 0 && i != last {
            continue;
        }
        out.push_str(&format!("{},{}", row.step, sci(row.t)));
        for v in row.x.iter().chain(&row.inv_err) {
            out.push(',');
            out.push_str(&sci(*v));
        }
        out.push(',');
        out.push_str(&sci(row.combined_err));
        out.push('\n');
    }
    out
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| Error::Io { path: dir.to_path_buf(), source })?;
    }
    fs::write(path, contents).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

pub fn export_report(report: &ConvergenceReport, format: Format, path: &Path) -> Result<()> {
    let body = match format {
        Format::Csv => convergence_csv(report),
        Format::Json => convergence_json(report)?,
    };
    write_file(path, &body)
}

pub fn import_report(path: &Path) -> Result<ConvergenceReport> {
    let s = fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    parse_convergence_json(&s)
}

/// Text table of errors by step size, with fitted orders.
pub fn summary_table(report: &ConvergenceReport) -> String {
    let Some(first) = report.methods.first() else {
        return String::from("(no methods)\n");
    };
    let mut out = format!("{:<12}", "h");
    for h in &first.h {
        out.push_str(&format!("{:>12}", format!("{h:.3e}")));
    }
    out.push_str(&format!("{:>8}\n", "order"));
    for m in &report.methods {
        out.push_str(&format!("{:<12}", m.method));
        for e in &m.mse_error {
            out.push_str(&format!("{:>12}", format!("{e:.2e}")));
        }
        match m.fit {
            Some(f) => out.push_str(&format!("{:>8.2}\n", f.order)),
            None => out.push_str(&format!("{:>8}\n", "-")),
        }
    }
    out
}
