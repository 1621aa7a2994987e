use std::path::Path;

use crate::error::{Error, Result};
use crate::io::{save_matrix, save_trace};
use crate::linalg::{marginal_residual, spd_inverse, sym, Mat, Vector};
use crate::solver::Trace;

use super::config::{ExperimentConfig, ProblemConfig};
use super::run::solve;

#[derive(Debug, Clone)]
pub struct OtReport {
    pub trace: Trace,
    pub plan: Mat,
    pub metric: Mat,
    /// Barycentric projections of the source points onto the target domain.
    pub projections: Mat,
    pub predicted_labels: Vec<usize>,
    pub target_labels: Vec<usize>,
    pub marginal_residual: f64,
    /// `‖M* − XᵀX‖_F / ‖XᵀX‖_F`.
    pub metric_rel_err: f64,
    /// Fraction of target points whose predicted label matches the truth.
    pub label_accuracy: f64,
}

/// `x̂_i = μ_i⁻¹ Σ_j Γ_ij y_j`.
pub fn barycentric_projection(plan: &Mat, target: &Mat) -> Mat {
    let rows = plan.column_sum();
    let mut out = plan * target;
    for (i, mut row) in out.row_iter_mut().enumerate() {
        row /= rows[i];
    }
    out
}

/// Label of the nearest projected source point for every target point, under
/// `(a − b)ᵀ M⁻¹ (a − b)`.
pub fn nearest_labels(targets: &Mat, projections: &Mat, source_labels: &[usize], metric: &Mat) -> Result<Vec<usize>> {
    let mi = spd_inverse(metric)?;
    (0..targets.nrows())
        .map(|j| {
            let yj = targets.row(j);
            let (best, _) = (0..projections.nrows())
                .map(|i| {
                    let d = (projections.row(i) - yj).transpose();
                    (i, (d.transpose() * &mi * &d)[(0, 0)])
                })
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .ok_or_else(|| Error::contract("no source points"))?;
            Ok(source_labels[best])
        })
        .collect()
}

/// Learns a transport plan and metric between two synthetic domains, then
/// transfers source labels to the target points.
pub fn ot_demo(cfg: &ExperimentConfig) -> Result<OtReport> {
    if !matches!(cfg.problem, ProblemConfig::Ot { .. }) {
        return Err(Error::Parse(format!(
            "ot-demo needs a problem of kind \"ot\", got \"{}\"",
            cfg.problem.label()
        )));
    }
    cfg.validate()?;
    let built = cfg.problem.build(cfg.seed)?;
    let data = built.domains.as_ref().ok_or_else(|| Error::contract("transport problem without domain data"))?;
    let trace = solve(&built, &cfg.solver.to_config(cfg.seed))?;
    let plan = trace.final_x.clone();
    let metric = trace.final_y.clone();
    let (n, m) = plan.shape();
    let mu = Vector::from_element(n, 1.0 / n as f64);
    let nu = Vector::from_element(m, 1.0 / m as f64);
    let projections = barycentric_projection(&plan, &data.target);
    let predicted_labels = nearest_labels(&data.target, &projections, &data.source_labels, &metric)?;
    let hits = predicted_labels
        .iter()
        .zip(&data.target_labels)
        .filter(|(a, b)| a == b)
        .count();
    let gram = sym(&data.source.tr_mul(&data.source));
    Ok(OtReport {
        marginal_residual: marginal_residual(&plan, &mu, &nu),
        metric_rel_err: (&metric - &gram).norm() / gram.norm(),
        label_accuracy: hits as f64 / m as f64,
        trace,
        plan,
        metric,
        projections,
        predicted_labels,
        target_labels: data.target_labels.clone(),
    })
}

/// Writes `plan.csv`, `metric.csv`, `projections.csv`, `labels.csv`,
/// `trace.csv` and `ot_report.csv` into `out`.
pub fn write_ot_outputs(report: &OtReport, out: &Path) -> Result<()> {
    std::fs::create_dir_all(out)?;
    save_matrix(&out.join("plan.csv"), &report.plan)?;
    save_matrix(&out.join("metric.csv"), &report.metric)?;
    save_matrix(&out.join("projections.csv"), &report.projections)?;
    save_trace(&out.join("trace.csv"), &report.trace)?;
    let io = |e: csv::Error| Error::Io(e.to_string());
    let mut w = csv::Writer::from_path(out.join("labels.csv")).map_err(io)?;
    w.write_record(["target", "predicted", "truth"]).map_err(io)?;
    for (j, (p, t)) in report.predicted_labels.iter().zip(&report.target_labels).enumerate() {
        w.write_record([j.to_string(), p.to_string(), t.to_string()]).map_err(io)?;
    }
    w.flush()?;
    let mut w = csv::Writer::from_path(out.join("ot_report.csv")).map_err(io)?;
    w.write_record(["marginal_residual", "metric_rel_err", "label_accuracy"]).map_err(io)?;
    w.write_record([
        report.marginal_residual.to_string(),
        report.metric_rel_err.to_string(),
        report.label_accuracy.to_string(),
    ])
    .map_err(io)?;
    w.flush()?;
    Ok(())
}
