//! Hypergradient estimators and the finite-difference reference oracle.
//!
//! Every estimator evaluates
//! `G F(x) ≈ G_x f(x, y) − G²_xy g(x, y)[v]` with `v ≈ H_y⁻¹ g(x, y)[G_y f(x, y)]`
//! and differs only in how `v` is obtained.

mod inner;
mod oracle;

pub use inner::{inner_loop, solve_lower, InnerTape};
pub use oracle::{fd_hypergrad_oracle, reference_hypergradient};

use std::fmt;

use crate::error::{Error, Result};
use crate::geometry::{tangent_basis, LinearMap, Manifold};
use crate::linalg::Mat;
use crate::problem::{Batch, BilevelProblem, EstimatorBatches};
use crate::tscg::{tscg, TscgConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    /// Exact inverse Hessian.
    Hinv,
    /// Tangent-space conjugate gradient.
    Cg,
    /// Truncated Neumann series.
    Ns,
    /// Reverse-mode differentiation through the inner loop.
    Ad,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 4] = [EstimatorKind::Hinv, EstimatorKind::Cg, EstimatorKind::Ns, EstimatorKind::Ad];

    pub fn label(self) -> &'static str {
        match self {
            EstimatorKind::Hinv => "hinv",
            EstimatorKind::Cg => "cg",
            EstimatorKind::Ns => "ns",
            EstimatorKind::Ad => "ad",
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hinv" => Ok(EstimatorKind::Hinv),
            "cg" => Ok(EstimatorKind::Cg),
            "ns" => Ok(EstimatorKind::Ns),
            "ad" => Ok(EstimatorKind::Ad),
            other => Err(Error::Parse(format!("unknown estimator `{other}` (expected hinv, cg, ns or ad)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorConfig {
    pub kind: EstimatorKind,
    pub cg: TscgConfig,
    pub ns_t: usize,
    pub ns_gamma: f64,
    /// Power-iteration check that `γ λ_max(H) < 1`, logging a warning otherwise.
    pub ns_spectral_check: bool,
    pub ad_s: usize,
    pub ad_eta_y: f64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            kind: EstimatorKind::Hinv,
            cg: TscgConfig::default(),
            ns_t: 50,
            ns_gamma: 1.0,
            ns_spectral_check: true,
            ad_s: 50,
            ad_eta_y: 0.5,
        }
    }
}

impl EstimatorConfig {
    pub fn new(kind: EstimatorKind) -> Self {
        Self {
            kind,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            EstimatorKind::Cg => self.cg.validate(),
            EstimatorKind::Ns if self.ns_t == 0 => Err(Error::contract("Neumann series needs T >= 1")),
            EstimatorKind::Ns if !(self.ns_gamma > 0.0) => Err(Error::contract("Neumann step gamma must be positive")),
            EstimatorKind::Ad if self.ad_s == 0 => Err(Error::contract("unrolled differentiation needs S >= 1")),
            EstimatorKind::Ad if !(self.ad_eta_y > 0.0) => Err(Error::contract("inner step size must be positive")),
            _ => Ok(()),
        }
    }
}

/// Per-call estimator diagnostics.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diagnostics {
    /// Which path produced the value, e.g. `hinv` or `hinv-via-cg`.
    pub method: String,
    pub cg_iterations: Option<usize>,
    pub cg_residual: Option<f64>,
    pub ns_terms: Option<usize>,
    /// Power-iteration estimate of `γ λ_max(H)`.
    pub ns_gamma_lambda_max: Option<f64>,
    pub ad_depth: Option<usize>,
    /// Largest adjoint norm met during the reverse sweep.
    pub ad_adjoint_norm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HypergradEstimate {
    pub value: Mat,
    pub diagnostics: Diagnostics,
}

/// `G_x f − G²_xy g[v]`.
fn assemble(p: &dyn BilevelProblem, x: &Mat, y: &Mat, v: &Mat, b: &EstimatorBatches) -> Result<Mat> {
    let gx = p.grad_x_f(x, y, &b.upper)?;
    let cross = p.cross_xy_g(x, y, &b.cross)?;
    Ok(gx - cross.apply(v)?)
}

/// Hypergradient through the problem's closed-form inverse Hessian.
pub fn estimate_hinv(p: &dyn BilevelProblem, x: &Mat, y: &Mat, b: &EstimatorBatches) -> Result<HypergradEstimate> {
    let hinv = p
        .hess_inv_y_g(x, y, &b.hess)
        .ok_or_else(|| Error::unsupported(format!("problem {} has no inverse Hessian; use cg or ns", p.name())))??;
    let gy = p.grad_y_f(x, y, &b.upper)?;
    let v = hinv.apply(&gy)?;
    Ok(HypergradEstimate {
        value: assemble(p, x, y, &v, b)?,
        diagnostics: Diagnostics {
            method: "hinv".into(),
            ..Diagnostics::default()
        },
    })
}

/// Settings used when the inverse-Hessian estimator has to fall back to CG.
pub fn hinv_fallback_cg(p: &dyn BilevelProblem) -> TscgConfig {
    TscgConfig {
        max_iters: 10 * p.lower().dim().max(10),
        residual_tol: 1e-14,
        warm_start: None,
    }
}

/// Inverse-Hessian estimate, delegating to CG at tolerance `1e-14` when no
/// closed-form inverse exists.
pub fn estimate_hinv_or_cg(p: &dyn BilevelProblem, x: &Mat, y: &Mat, b: &EstimatorBatches) -> Result<HypergradEstimate> {
    match estimate_hinv(p, x, y, b) {
        Err(Error::Unsupported(_)) => {
            let mut est = estimate_cg(p, x, y, &hinv_fallback_cg(p), b)?;
            est.diagnostics.method = "hinv-via-cg".into();
            Ok(est)
        }
        other => other,
    }
}

/// Hypergradient with `v` from tangent-space conjugate gradient.
pub fn estimate_cg(
    p: &dyn BilevelProblem,
    x: &Mat,
    y: &Mat,
    cfg: &TscgConfig,
    b: &EstimatorBatches,
) -> Result<HypergradEstimate> {
    cfg.validate()?;
    let h = p.hess_y_g(x, y, &b.hess)?;
    let gy = p.grad_y_f(x, y, &b.upper)?;
    let sol = tscg(p.lower(), y, &h, &gy, cfg)?;
    Ok(HypergradEstimate {
        value: assemble(p, x, y, &sol.solution, b)?,
        diagnostics: Diagnostics {
            method: "cg".into(),
            cg_iterations: Some(sol.iterations),
            cg_residual: Some(sol.residual_norm),
            ..Diagnostics::default()
        },
    })
}

/// Power-iteration estimate of the largest eigenvalue of a self-adjoint `h`.
fn spectral_bound(m: &dyn Manifold, y: &Mat, h: &LinearMap<'_>, start: &Mat, iters: usize) -> Result<f64> {
    let mut v = start.clone();
    let mut n = m.norm(y, &v);
    if n == 0.0 {
        return Ok(0.0);
    }
    let mut lambda = 0.0;
    for _ in 0..iters {
        v /= n;
        let hv = h.apply(&v)?;
        lambda = m.inner(y, &v, &hv);
        n = m.norm(y, &hv);
        if n == 0.0 {
            return Ok(0.0);
        }
        v = hv;
    }
    Ok(lambda.max(n))
}

/// Truncated Neumann series `v = γ Σ_{i<T} (id − γH)^i [G_y f]`.
pub fn neumann_solve(h: &LinearMap<'_>, rhs: &Mat, gamma: f64, terms: usize) -> Result<Mat> {
    let mut acc = Mat::zeros(rhs.nrows(), rhs.ncols());
    let mut term = rhs.clone();
    for _ in 0..terms {
        acc += &term;
        let ht = h.apply(&term)?;
        term -= ht * gamma;
        if !term.iter().all(|v| v.is_finite()) {
            return Err(Error::numeric("Neumann series diverged"));
        }
    }
    Ok(acc * gamma)
}

/// Hypergradient with `v` from a truncated Neumann series.
pub fn estimate_ns(p: &dyn BilevelProblem, x: &Mat, y: &Mat, cfg: &EstimatorConfig, b: &EstimatorBatches) -> Result<HypergradEstimate> {
    if cfg.ns_t == 0 || !(cfg.ns_gamma > 0.0) {
        return Err(Error::contract("Neumann series needs T >= 1 and gamma > 0"));
    }
    let h = p.hess_y_g(x, y, &b.hess)?;
    let gy = p.grad_y_f(x, y, &b.upper)?;
    let mut diagnostics = Diagnostics {
        method: "ns".into(),
        ns_terms: Some(cfg.ns_t),
        ..Diagnostics::default()
    };
    if cfg.ns_spectral_check {
        let bound = cfg.ns_gamma * spectral_bound(p.lower(), y, &h, &gy, 20)?;
        if bound >= 1.0 {
            log::warn!("Neumann step gamma={} leaves the convergent window (gamma*lambda_max ≈ {bound:.3})", cfg.ns_gamma);
        }
        diagnostics.ns_gamma_lambda_max = Some(bound);
    }
    let v = neumann_solve(&h, &gy, cfg.ns_gamma, cfg.ns_t)?;
    Ok(HypergradEstimate {
        value: assemble(p, x, y, &v, b)?,
        diagnostics,
    })
}

/// Reverse accumulation through the last `depth` steps of an inner-loop tape:
/// `G_x f(x, y_S) + (D_x y_S)†[G_y f(x, y_S)]`.
pub fn estimate_ad_tape(
    p: &dyn BilevelProblem,
    x: &Mat,
    tape: &InnerTape,
    depth: usize,
    upper: &Batch,
) -> Result<HypergradEstimate> {
    let m = p.lower();
    let steps = tape.steps();
    let depth = depth.min(steps);
    let y_s = tape.last();
    let eta = tape.eta;
    let mut value = p.grad_x_f(x, y_s, upper)?;
    let mut lambda = p.grad_y_f(x, y_s, upper)?;
    let mut max_norm = m.norm(y_s, &lambda);
    for s in (steps - depth..steps).rev() {
        let (ys, ynext) = (&tape.points[s], &tape.points[s + 1]);
        let batch = &tape.batches[s];
        let mu = m.proj_adjoint(ys, ynext, &lambda);
        let cross = p.cross_xy_g(x, ys, batch)?;
        value -= cross.apply(&mu)? * eta;
        let h = p.hess_y_g(x, ys, batch)?;
        lambda = &mu - h.apply(&mu)? * eta;
        max_norm = max_norm.max(m.norm(ys, &lambda));
    }
    Ok(HypergradEstimate {
        value,
        diagnostics: Diagnostics {
            method: "ad".into(),
            ad_depth: Some(depth),
            ad_adjoint_norm: Some(max_norm),
            ..Diagnostics::default()
        },
    })
}

/// Forward-mode counterpart of [`estimate_ad_tape`] over an orthonormal basis
/// of `T_x`; one sweep per basis vector, so only for tiny problems.
pub fn estimate_ad_forward(p: &dyn BilevelProblem, x: &Mat, tape: &InnerTape, upper: &Batch) -> Result<Mat> {
    let m = p.lower();
    let basis = tangent_basis(p.upper(), x);
    let eta = tape.eta;
    let mut jac: Vec<Mat> = basis.iter().map(|_| m.zero_tangent(&tape.points[0])).collect();
    for s in 0..tape.steps() {
        let (ys, ynext) = (&tape.points[s], &tape.points[s + 1]);
        let batch = &tape.batches[s];
        let h = p.hess_y_g(x, ys, batch)?;
        let cross = p.cross_xy_g(x, ys, batch)?;
        for (j, u) in jac.iter_mut().zip(&basis) {
            let next = &*j - h.apply(j)? * eta - cross.adjoint_apply(u)? * eta;
            *j = m.proj(ynext, &next);
        }
    }
    let y_s = tape.last();
    let gy = p.grad_y_f(x, y_s, upper)?;
    let mut value = p.grad_x_f(x, y_s, upper)?;
    for (j, u) in jac.iter().zip(&basis) {
        value += u * m.inner(y_s, j, &gy);
    }
    Ok(value)
}

/// Dispatches on `cfg.kind`. The unrolled estimator needs the inner-loop
/// `tape`; the others evaluate at `y`.
pub fn estimate(
    p: &dyn BilevelProblem,
    x: &Mat,
    y: &Mat,
    cfg: &EstimatorConfig,
    b: &EstimatorBatches,
    tape: Option<&InnerTape>,
) -> Result<HypergradEstimate> {
    cfg.validate()?;
    match cfg.kind {
        EstimatorKind::Hinv => estimate_hinv_or_cg(p, x, y, b),
        EstimatorKind::Cg => estimate_cg(p, x, y, &cfg.cg, b),
        EstimatorKind::Ns => estimate_ns(p, x, y, cfg, b),
        EstimatorKind::Ad => {
            let tape = tape.ok_or_else(|| Error::contract("unrolled differentiation needs the inner-loop tape"))?;
            estimate_ad_tape(p, x, tape, cfg.ad_s, &b.upper)
        }
    }
}

/// Runs `cfg.ad_s` inner steps from `y0` with full batches and differentiates
/// through them.
pub fn estimate_ad(
    p: &dyn BilevelProblem,
    x: &Mat,
    y0: &Mat,
    cfg: &EstimatorConfig,
    map_mode: crate::geometry::MapMode,
) -> Result<(HypergradEstimate, InnerTape)> {
    cfg.validate()?;
    let tape = inner_loop(p, x, y0, cfg.ad_s, cfg.ad_eta_y, map_mode, || Batch::Full)?;
    let est = estimate_ad_tape(p, x, &tape, cfg.ad_s, &Batch::Full)?;
    Ok((est, tape))
}
