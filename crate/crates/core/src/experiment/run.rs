use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::io::{save_matrix, save_trace};
use crate::solver::{rhgd, rhgd_minmax, rshgd, SolverConfig, Trace};

use super::config::{BuiltProblem, ExperimentConfig};

pub const MANIFEST_FILE: &str = "run_manifest.toml";

/// Picks the min-max, stochastic or deterministic solver for the problem.
pub fn solve(built: &BuiltProblem, cfg: &SolverConfig) -> Result<Trace> {
    let p = built.problem.as_ref();
    if p.is_minmax() {
        rhgd_minmax(p, cfg, &built.x0, &built.y0)
    } else if cfg.batch_sizes.is_some() {
        rshgd(p, cfg, &built.x0, &built.y0)
    } else {
        rhgd(p, cfg, &built.x0, &built.y0)
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    /// One trace per repeat with the file it was written to.
    pub traces: Vec<(PathBuf, Trace)>,
    pub manifest: PathBuf,
}

/// Seed used by repeat `i`.
pub fn repeat_seed(cfg: &ExperimentConfig, i: usize) -> u64 {
    cfg.seed.wrapping_add(i as u64)
}

fn suffix(cfg: &ExperimentConfig, i: usize) -> String {
    if cfg.repeats == 1 {
        String::new()
    } else {
        format!("_seed{}", repeat_seed(cfg, i))
    }
}

/// Serializes the resolved config, seed and library version.
pub fn manifest(cfg: &ExperimentConfig) -> Result<String> {
    let mut table = toml::Table::new();
    table.insert("library".into(), env!("CARGO_PKG_NAME").into());
    table.insert("version".into(), env!("CARGO_PKG_VERSION").into());
    table.insert("seed".into(), toml::Value::Integer(cfg.seed as i64));
    let resolved = toml::Value::try_from(cfg).map_err(|e| Error::Parse(e.to_string()))?;
    table.insert("config".into(), resolved);
    toml::to_string(&table).map_err(|e| Error::Parse(e.to_string()))
}

/// Runs every repeat of `cfg`, writing `trace*.csv`, the final iterates and
/// a run manifest into `out`.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path) -> Result<RunOutput> {
    cfg.validate()?;
    std::fs::create_dir_all(out)?;
    let mut resolved = cfg.clone();
    resolved.output_dir = Some(out.to_path_buf());
    let manifest_path = out.join(MANIFEST_FILE);
    std::fs::write(&manifest_path, manifest(&resolved)?)?;
    let built = cfg.problem.build(cfg.seed)?;
    let mut traces = Vec::with_capacity(cfg.repeats);
    for i in 0..cfg.repeats {
        let solver = cfg.solver.to_config(repeat_seed(cfg, i));
        let trace = solve(&built, &solver)?;
        let tag = suffix(cfg, i);
        let path = out.join(format!("trace{tag}.csv"));
        save_trace(&path, &trace)?;
        save_matrix(&out.join(format!("final_x{tag}.csv")), &trace.final_x)?;
        save_matrix(&out.join(format!("final_y{tag}.csv")), &trace.final_y)?;
        if let Some(last) = trace.records.last() {
            log::info!(
                "{} repeat {i}: {} iterations, final upper objective {:.6e}, hypergradient norm {:.3e}",
                cfg.problem.label(),
                trace.len(),
                last.upper_obj,
                last.hypergrad_norm
            );
        }
        traces.push((path, trace));
    }
    Ok(RunOutput {
        traces,
        manifest: manifest_path,
    })
}
