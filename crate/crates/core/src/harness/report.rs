//! Convergence traces as CSV and benchmark tables as text plus CSV.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{ExperimentResult, HarnessError};
use crate::solvers::{SolveReport, TraceEntry};

const TRACE_HEADER: [&str; 4] = ["iteration", "rse", "selected_index", "cumulative_seconds"];

#[derive(Serialize, Deserialize)]
struct TraceRow {
    iteration: usize,
    rse: f64,
    /// One-based row or block index.
    selected_index: usize,
    cumulative_seconds: f64,
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> HarnessError + '_ {
    move |source| HarnessError::Csv {
        path: path.display().to_string(),
        source,
    }
}

/// One line per iteration under the header `iteration,rse,selected_index,cumulative_seconds`.
/// Selected indices are one-based.
pub fn write_trace_csv(report: &SolveReport, path: &Path) -> Result<(), HarnessError> {
    let err = csv_err(path);
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(&err)?;
    w.write_record(TRACE_HEADER).map_err(&err)?;
    for e in &report.trace {
        w.serialize(TraceRow {
            iteration: e.iteration,
            rse: e.rse,
            selected_index: e.selected + 1,
            cumulative_seconds: e.seconds,
        })
        .map_err(&err)?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

pub fn read_trace_csv(path: &Path) -> Result<Vec<TraceEntry>, HarnessError> {
    let err = csv_err(path);
    let mut r = csv::Reader::from_path(path).map_err(&err)?;
    let header = r.headers().map_err(&err)?;
    if header.iter().ne(TRACE_HEADER) {
        return Err(HarnessError::Parse {
            path: path.display().to_string(),
            line: 1,
            message: format!("expected header {}", TRACE_HEADER.join(",")),
        });
    }
    r.deserialize::<TraceRow>()
        .map(|row| {
            let row = row.map_err(&err)?;
            if row.selected_index == 0 {
                return Err(HarnessError::Parse {
                    path: path.display().to_string(),
                    line: row.iteration + 1,
                    message: "selected_index is one-based".into(),
                });
            }
            Ok(TraceEntry {
                iteration: row.iteration,
                rse: row.rse,
                selected: row.selected_index - 1,
                seconds: row.cumulative_seconds,
            })
        })
        .collect()
}

fn fmt_opt(v: Option<f64>, digits: usize) -> String {
    match v {
        Some(v) if v.is_infinite() => "Inf".into(),
        Some(v) => format!("{v:.digits$}"),
        None => "-".into(),
    }
}

/// Plain-text table with one column per matrix: shape, density, `||A||_2^2`, `cond(A)`,
/// `t`, then IT and CPU rows per method, then the speed-ups.
pub fn render_report(results: &[ExperimentResult]) -> String {
    let mut rows: Vec<(String, Vec<String>)> = vec![
        ("matrix".into(), results.iter().map(|r| r.matrix.name.clone()).collect()),
        (
            "m x n".into(),
            results
                .iter()
                .map(|r| format!("{} x {}", r.matrix.m, r.matrix.n))
                .collect(),
        ),
        (
            "density".into(),
            results
                .iter()
                .map(|r| format!("{:.2}%", 100.0 * r.matrix.density))
                .collect(),
        ),
        (
            "||A||_2^2".into(),
            results
                .iter()
                .map(|r| format!("{:.4}", r.matrix.spectral_norm_sq))
                .collect(),
        ),
        (
            "cond(A)".into(),
            results.iter().map(|r| fmt_opt(r.matrix.condition, 4)).collect(),
        ),
        ("t".into(), results.iter().map(|r| r.matrix.t.to_string()).collect()),
    ];
    let mut labels: Vec<String> = Vec::new();
    for r in results {
        for m in &r.methods {
            let l = m.spec.label();
            if !labels.contains(&l) {
                labels.push(l);
            }
        }
    }
    for label in &labels {
        let find = |r: &ExperimentResult| r.methods.iter().find(|m| &m.spec.label() == label).cloned();
        for (what, f) in [
            ("IT", (|m: &super::MethodResult| format!("{:.1}", m.mean_iterations())) as fn(&_) -> _),
            ("CPU", |m| format!("{:.4}", m.mean_seconds())),
        ] {
            rows.push((
                format!("{label} {what}"),
                results
                    .iter()
                    .map(|r| match find(r) {
                        Some(m) if !m.failures.is_empty() => format!("{}*", f(&m)),
                        Some(m) => f(&m),
                        None => "-".into(),
                    })
                    .collect(),
            ));
        }
    }
    for (name, get) in [
        ("SU1", (|r: &ExperimentResult| r.speedups.su1) as fn(&_) -> _),
        ("SU2", |r| r.speedups.su2),
        ("SU3", |r| r.speedups.su3),
    ] {
        rows.push((name.into(), results.iter().map(|r| fmt_opt(get(r), 2)).collect()));
    }

    let head = rows.iter().map(|(h, _)| h.len()).max().unwrap_or(0);
    let widths: Vec<usize> = (0..results.len())
        .map(|j| rows.iter().map(|(_, c)| c[j].len()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for (h, cells) in &rows {
        let _ = write!(out, "{h:<head$}");
        for (c, w) in cells.iter().zip(&widths) {
            let _ = write!(out, "  {c:>w$}");
        }
        out.push('\n');
    }
    if results.iter().any(|r| r.methods.iter().any(|m| !m.failures.is_empty())) {
        out.push_str("* some repetitions failed; means cover the ones that ran\n");
    }
    out
}

#[derive(Serialize)]
struct ReportRow<'a> {
    matrix: &'a str,
    m: usize,
    n: usize,
    nnz: usize,
    density: f64,
    spectral_norm_sq: f64,
    condition: Option<f64>,
    t: usize,
    method: String,
    omega: Option<f64>,
    repetitions: usize,
    mean_iterations: f64,
    mean_seconds: f64,
    mean_final_rse: f64,
    failures: usize,
    su1: Option<f64>,
    su2: Option<f64>,
    su3: Option<f64>,
}

/// The CSV twin written next to a text report: `report.txt` gets `report.csv`.
pub fn csv_twin(path: &Path) -> PathBuf {
    if path.extension().is_some_and(|e| e == "csv") {
        let mut s = path.as_os_str().to_owned();
        s.push(".csv");
        PathBuf::from(s)
    } else {
        path.with_extension("csv")
    }
}

/// Writes [`render_report`] to `path` and one CSV row per (matrix, method) to its twin.
pub fn write_report(results: &[ExperimentResult], path: &Path) -> Result<(), HarnessError> {
    fs::write(path, render_report(results)).map_err(|e| HarnessError::io(path, e))?;
    let twin = csv_twin(path);
    let err = csv_err(&twin);
    let mut w = csv::Writer::from_path(&twin).map_err(&err)?;
    for r in results {
        for m in &r.methods {
            w.serialize(ReportRow {
                matrix: &r.matrix.name,
                m: r.matrix.m,
                n: r.matrix.n,
                nnz: r.matrix.nnz,
                density: r.matrix.density,
                spectral_norm_sq: r.matrix.spectral_norm_sq,
                condition: r.matrix.condition,
                t: r.matrix.t,
                method: m.spec.kind.name().to_string(),
                omega: m.spec.omega,
                repetitions: m.iterations.len(),
                mean_iterations: m.mean_iterations(),
                mean_seconds: m.mean_seconds(),
                mean_final_rse: m.mean_final_rse(),
                failures: m.failures.len(),
                su1: r.speedups.su1,
                su2: r.speedups.su2,
                su3: r.speedups.su3,
            })
            .map_err(&err)?;
        }
    }
    w.flush().map_err(|e| HarnessError::io(&twin, e))
}
