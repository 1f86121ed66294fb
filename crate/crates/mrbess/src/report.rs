//! File interfaces: numeric CSV matrices, JSON run reports, and the
//! benchmark table in CSV form.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{MrbessError, Result};
use crate::model::{FitResult, MetricsRecord};
use crate::simulation::BenchmarkTable;
use crate::solver::TerminationStatus;
use crate::tuning::{GicRecord, GridReport, TuneReport, ValidationRecord, ValidationReport};

/// Header of the benchmark CSV, one row per (method, scenario).
pub const BENCH_CSV_HEADER: &str = "method,p,ErC_x1000_mean,ErC_x1000_sd,ErXC_x10_mean,ErXC_x10_sd,FPR_pct_mean,FPR_pct_sd,FNR_pct_mean,FNR_pct_sd,time_s_mean,time_s_sd,rank_mean,rank_sd";

/// Read a rectangular numeric CSV into a row-major matrix. `has_header`
/// skips the first row. Errors name the offending line (1-based, header
/// included) and column.
pub fn read_matrix_csv(path: &Path, has_header: bool) -> Result<DMatrix<f64>> {
    let display = path.display().to_string();
    let file = File::open(path).map_err(|source| MrbessError::Io {
        path: display.clone(),
        source,
    })?;
    let reader = BufReader::new(file);

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width: Option<usize> = None;
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| MrbessError::Io {
            path: display.clone(),
            source,
        })?;
        let line_no = idx + 1;
        if has_header && idx == 0 {
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for (col, token) in line.split(',').enumerate() {
            let token = token.trim();
            let value: f64 = token.parse().map_err(|_| MrbessError::BadNumber {
                path: display.clone(),
                line: line_no,
                col: col + 1,
                token: token.to_string(),
            })?;
            row.push(value);
        }
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(MrbessError::RaggedCsv {
                    path: display,
                    line: line_no,
                    expected: w,
                    got: row.len(),
                });
            }
            _ => {}
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(MrbessError::EmptyCsv { path: display });
    }
    let ncols = width.unwrap();
    let nrows = rows.len();
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

/// Write a matrix as CSV in scientific notation with 17 significant digits,
/// enough for an exact f64 round trip.
pub fn write_matrix_csv(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let display = path.display().to_string();
    let file = File::create(path).map_err(|source| MrbessError::Io {
        path: display.clone(),
        source,
    })?;
    let mut w = BufWriter::new(file);
    let io_err = |source| MrbessError::Io {
        path: display.clone(),
        source,
    };
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if j > 0 {
                w.write_all(b",").map_err(io_err)?;
            }
            write!(w, "{:.16e}", m[(i, j)]).map_err(io_err)?;
        }
        w.write_all(b"\n").map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

/// Fit block of the JSON report. Indices are 1-based to match the usual
/// statistical convention; the coefficient matrix itself goes to a separate
/// CSV whose path is echoed here.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitSummary {
    pub active_set: Vec<usize>,
    pub rank: usize,
    pub sparsity: usize,
    pub loss: f64,
    pub gic: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub cycled: bool,
    pub status: TerminationStatus,
    pub rank_capped: bool,
    pub c_path: Option<String>,
}

impl FitSummary {
    pub fn from_fit(fit: &FitResult, c_path: Option<String>) -> Self {
        FitSummary {
            active_set: fit.active_set.iter().map(|&j| j + 1).collect(),
            rank: fit.rank,
            sparsity: fit.sparsity,
            loss: fit.loss,
            gic: if fit.gic.is_finite() { Some(fit.gic) } else { None },
            iterations: fit.iterations,
            converged: fit.converged,
            cycled: fit.cycled,
            status: fit.status(),
            rank_capped: fit.rank_capped,
            c_path,
        }
    }
}

/// Tuning trail embedded in the JSON report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TuneTrace {
    pub mode: String,
    pub chosen_s: usize,
    pub chosen_r: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stage1: Option<Vec<GicRecord>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stage2: Option<Vec<GicRecord>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<Vec<GicRecord>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub validation: Option<Vec<ValidationRecord>>,
    pub failed_cells: usize,
}

impl TuneTrace {
    pub fn from_tune(report: &TuneReport) -> Self {
        TuneTrace {
            mode: "gic".into(),
            chosen_s: report.chosen_s,
            chosen_r: report.chosen_r,
            stage1: Some(report.stage1.clone()),
            stage2: Some(report.stage2.clone()),
            grid: None,
            validation: None,
            failed_cells: report.failed_cells,
        }
    }

    pub fn from_grid(report: &GridReport) -> Self {
        TuneTrace {
            mode: "grid".into(),
            chosen_s: report.chosen_s,
            chosen_r: report.chosen_r,
            stage1: None,
            stage2: None,
            grid: Some(report.records.clone()),
            validation: None,
            failed_cells: report.failed_cells,
        }
    }

    pub fn from_validation(report: &ValidationReport) -> Self {
        TuneTrace {
            mode: "cv".into(),
            chosen_s: report.chosen_s,
            chosen_r: report.chosen_r,
            stage1: None,
            stage2: None,
            grid: None,
            validation: Some(report.cells.clone()),
            failed_cells: report.failed_cells,
        }
    }
}

/// Top-level JSON report for every subcommand.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    pub config: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tune_trace: Option<TuneTrace>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metrics: Option<MetricsRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bench: Option<BenchmarkTable>,
    pub timing_s: f64,
}

pub fn write_json_report(path: &Path, report: &RunReport) -> Result<()> {
    let display = path.display().to_string();
    let file = File::create(path).map_err(|source| MrbessError::Io {
        path: display.clone(),
        source,
    })?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, report)?;
    w.write_all(b"\n").map_err(|source| MrbessError::Io {
        path: display.clone(),
        source,
    })?;
    w.flush().map_err(|source| MrbessError::Io {
        path: display,
        source,
    })
}

/// Benchmark table as CSV text, with the error metrics scaled the way
/// results are usually quoted: Er(C) x 1000, Er(XC) x 10, rates in percent.
pub fn bench_csv_string(table: &BenchmarkTable) -> String {
    let mut out = String::from(BENCH_CSV_HEADER);
    out.push('\n');
    for row in &table.rows {
        let cells = [
            fmt(row.mean.er_c * 1000.0),
            fmt(row.sd.er_c * 1000.0),
            fmt(row.mean.er_xc * 10.0),
            fmt(row.sd.er_xc * 10.0),
            fmt(row.mean.fpr * 100.0),
            fmt(row.sd.fpr * 100.0),
            fmt(row.mean.fnr * 100.0),
            fmt(row.sd.fnr * 100.0),
            fmt(row.mean.wall_time_s),
            fmt(row.sd.wall_time_s),
            fmt(row.mean.est_rank),
            fmt(row.sd.est_rank),
        ];
        out.push_str(&format!("{},{},{}\n", row.method, row.p, cells.join(",")));
    }
    out
}

pub fn write_bench_csv(path: &Path, table: &BenchmarkTable) -> Result<()> {
    std::fs::write(path, bench_csv_string(table)).map_err(|source| MrbessError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn fmt(v: f64) -> String {
    format!("{v:.6}")
}
