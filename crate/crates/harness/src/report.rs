//! Aggregates every diagnostics JSON under a directory into one CSV.

use std::path::Path;

use serde::Serialize;
use walkdir::WalkDir;

use crate::experiment::{RunStatus, RunSummary, DIAGNOSTICS_FILE};
use crate::sweep::write_rows;
use crate::HarnessError;

pub const REPORT_FILE: &str = "report.csv";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    /// Run directory relative to the report root.
    pub run: String,
    pub scenario: String,
    pub status: String,
    pub t_final: f64,
    pub theta0: f64,
    pub fitted_rate_l2: Option<f64>,
    pub fitted_rate_hs: Option<f64>,
    pub r2: Option<f64>,
    pub balance_residual: Option<f64>,
    pub moment_drift_max: f64,
    pub curl_resid: f64,
    pub solenoidal_resid: f64,
    pub hessian_min_eig: f64,
    pub commutator_ratio_max: Option<f64>,
    pub oracle_map_error: Option<f64>,
}

/// Collects rows sorted by run path and writes them to `dir/report.csv`.
pub fn build_report(dir: &Path) -> Result<Vec<ReportRow>, HarnessError> {
    let io = |path: &Path, source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut rows = Vec::new();
    for entry in WalkDir::new(dir).sort_by_file_name() {
        let entry = entry.map_err(|e| {
            let path = e.path().unwrap_or(dir).to_path_buf();
            io(&path, e.into())
        })?;
        if entry.file_name() != DIAGNOSTICS_FILE || !entry.file_type().is_file() {
            continue;
        }
        let path = entry.path();
        let text = std::fs::read_to_string(path).map_err(|e| io(path, e))?;
        let s: RunSummary = serde_json::from_str(&text).map_err(|e| HarnessError::Report {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let run = path
            .parent()
            .and_then(|p| p.strip_prefix(dir).ok())
            .map(|p| p.display().to_string())
            .filter(|p| !p.is_empty())
            .unwrap_or_else(|| ".".to_string());
        let d = s.diagnostics;
        rows.push(ReportRow {
            run,
            scenario: s.scenario,
            status: match s.status {
                RunStatus::Completed => "completed".into(),
                RunStatus::Blowup => "blowup".into(),
            },
            t_final: s.t_final,
            theta0: d.theta0,
            fitted_rate_l2: d.fitted_rate_l2,
            fitted_rate_hs: d.fitted_rate_hs,
            r2: d.r2,
            balance_residual: d.balance_residual,
            moment_drift_max: d.moment_drift_max,
            curl_resid: d.curl_resid,
            solenoidal_resid: d.solenoidal_resid,
            hessian_min_eig: d.hessian_min_eig,
            commutator_ratio_max: d.commutator_ratio_max,
            oracle_map_error: d.oracle.map(|o| o.map_error),
        });
    }
    write_rows(&dir.join(REPORT_FILE), &rows)?;
    Ok(rows)
}
