use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use crate::error::{Error, Result};
use crate::hypergrad::EstimatorKind;
use crate::io::save_trace;
use crate::solver::{Trace, TraceRecord};

use super::config::{BuiltProblem, SweepSpec};
use super::run::solve;

pub const SUMMARY_FILE: &str = "summary.csv";
pub const SUMMARY_HEADER: [&str; 6] = [
    "estimator",
    "S",
    "T",
    "final_upper_obj",
    "median_est_err_last50",
    "total_wall_s",
];

/// One point of the sweep grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub kind: EstimatorKind,
    pub inner_steps: usize,
    /// CG iterations or Neumann terms; `None` for estimators without one.
    pub terms: Option<usize>,
    pub ns_gamma: Option<f64>,
}

impl SweepCell {
    pub fn label(&self) -> String {
        match self.ns_gamma {
            Some(g) => format!("{}:gamma={g}", self.kind),
            None => self.kind.to_string(),
        }
    }

    fn file_stem(&self, index: usize) -> String {
        let mut s = format!("cell{index:03}_{}_S{}", self.kind, self.inner_steps);
        if let Some(t) = self.terms {
            s.push_str(&format!("_T{t}"));
        }
        if let Some(g) = self.ns_gamma {
            s.push_str(&format!("_gamma{g}"));
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub cell: SweepCell,
    pub trace_file: Option<PathBuf>,
    pub final_upper_obj: Option<f64>,
    pub median_est_err_last50: Option<f64>,
    pub total_wall_s: Option<f64>,
    pub error: Option<String>,
}

/// Expands the axes, collapsing `T` and `γ` for estimators that ignore them.
pub fn cells(spec: &SweepSpec) -> Vec<SweepCell> {
    let base = &spec.base.solver;
    let a = &spec.axes;
    let kinds = if a.estimators.is_empty() {
        vec![base.estimator.kind]
    } else {
        a.estimators.clone()
    };
    let steps = if a.inner_steps.is_empty() {
        vec![base.inner_steps]
    } else {
        a.inner_steps.clone()
    };
    let mut out = Vec::new();
    for &kind in &kinds {
        let terms: Vec<Option<usize>> = match kind {
            EstimatorKind::Cg | EstimatorKind::Ns if !a.terms.is_empty() => a.terms.iter().map(|&t| Some(t)).collect(),
            EstimatorKind::Cg => vec![Some(base.estimator.cg_max_iters)],
            EstimatorKind::Ns => vec![Some(base.estimator.ns_t)],
            _ => vec![None],
        };
        let gammas: Vec<Option<f64>> = match kind {
            EstimatorKind::Ns if !a.ns_gamma.is_empty() => a.ns_gamma.iter().map(|&g| Some(g)).collect(),
            _ => vec![None],
        };
        for &s in &steps {
            for &t in &terms {
                for &g in &gammas {
                    out.push(SweepCell {
                        kind,
                        inner_steps: s,
                        terms: t,
                        ns_gamma: g,
                    });
                }
            }
        }
    }
    out
}

/// Median of the recorded estimation errors among the last 50 records.
pub fn median_est_err_last50(records: &[TraceRecord]) -> Option<f64> {
    let start = records.len().saturating_sub(50);
    let mut errs: Vec<f64> = records[start..].iter().filter_map(|r| r.est_err).collect();
    if errs.is_empty() {
        return None;
    }
    errs.sort_by(f64::total_cmp);
    let n = errs.len();
    Some(if n % 2 == 1 {
        errs[n / 2]
    } else {
        0.5 * (errs[n / 2 - 1] + errs[n / 2])
    })
}

/// Summary values recomputed from a trace: final objective, median error
/// over the last 50 iterations and the last recorded wall time.
pub fn summarize(records: &[TraceRecord]) -> (Option<f64>, Option<f64>, Option<f64>) {
    let last = records.last();
    (
        last.map(|r| r.upper_obj),
        median_est_err_last50(records),
        last.map(|r| r.wall_s),
    )
}

fn run_cell(spec: &SweepSpec, built: &BuiltProblem, cell: &SweepCell, index: usize, out: &Path) -> Result<(PathBuf, Trace)> {
    let mut section = spec.base.solver.clone();
    section.inner_steps = cell.inner_steps;
    section.estimator.kind = cell.kind;
    match cell.kind {
        EstimatorKind::Cg => section.estimator.cg_max_iters = cell.terms.unwrap_or(section.estimator.cg_max_iters),
        EstimatorKind::Ns => section.estimator.ns_t = cell.terms.unwrap_or(section.estimator.ns_t),
        _ => {}
    }
    if let Some(g) = cell.ns_gamma {
        section.estimator.ns_gamma = g;
    }
    let cfg = section.to_config(spec.base.seed);
    cfg.validate()?;
    let trace = solve(built, &cfg)?;
    let path = out.join(format!("{}.csv", cell.file_stem(index)));
    save_trace(&path, &trace)?;
    Ok((path, trace))
}

/// Runs every cell on `parallelism` worker threads and writes one trace per
/// cell plus `summary.csv`. Failed cells are logged and leave empty fields.
pub fn run_sweep(spec: &SweepSpec, out: &Path, parallelism: usize) -> Result<Vec<SummaryRow>> {
    std::fs::create_dir_all(out)?;
    let built = spec.base.problem.build(spec.base.seed)?;
    let grid = cells(spec);
    let next = AtomicUsize::new(0);
    let rows: Mutex<Vec<Option<SummaryRow>>> = Mutex::new(vec![None; grid.len()]);
    std::thread::scope(|scope| {
        for _ in 0..parallelism.clamp(1, grid.len().max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(cell) = grid.get(i) else { break };
                let row = match run_cell(spec, &built, cell, i, out) {
                    Ok((path, trace)) => {
                        let (f, e, w) = summarize(&trace.records);
                        SummaryRow {
                            cell: cell.clone(),
                            trace_file: Some(path),
                            final_upper_obj: f,
                            median_est_err_last50: e,
                            total_wall_s: w,
                            error: None,
                        }
                    }
                    Err(err) => {
                        log::error!("sweep cell {} (S={}) failed: {err}", cell.label(), cell.inner_steps);
                        SummaryRow {
                            cell: cell.clone(),
                            trace_file: None,
                            final_upper_obj: None,
                            median_est_err_last50: None,
                            total_wall_s: None,
                            error: Some(err.to_string()),
                        }
                    }
                };
                rows.lock().expect("summary lock")[i] = Some(row);
            });
        }
    });
    let rows: Vec<SummaryRow> = rows
        .into_inner()
        .expect("summary lock")
        .into_iter()
        .map(|r| r.expect("every cell ran"))
        .collect();
    write_summary(&out.join(SUMMARY_FILE), &rows)?;
    Ok(rows)
}

fn field(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Io(e.to_string()))?;
    w.write_record(SUMMARY_HEADER).map_err(|e| Error::Io(e.to_string()))?;
    for r in rows {
        w.write_record([
            r.cell.label(),
            r.cell.inner_steps.to_string(),
            r.cell.terms.map(|t| t.to_string()).unwrap_or_default(),
            field(r.final_upper_obj),
            field(r.median_est_err_last50),
            field(r.total_wall_s),
        ])
        .map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}
