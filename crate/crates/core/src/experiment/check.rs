use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{LinearMap, Manifold};
use crate::hypergrad::{estimate_hinv_or_cg, fd_hypergrad_oracle, solve_lower};
use crate::linalg::Mat;
use crate::problem::{Batch, BilevelProblem, EstimatorBatches};

use super::config::ExperimentConfig;

/// Largest upper dimension accepted by the finite-difference checks.
pub const MAX_UPPER_DIM: usize = 200;
/// Random directions per derivative check.
pub const DIRECTIONS: usize = 4;

const FIRST_ORDER_STEP: f64 = 1e-5;
const SECOND_ORDER_STEP: f64 = 1e-3;
const FIRST_ORDER_TOL: f64 = 1e-4;
const SECOND_ORDER_TOL: f64 = 1e-4;
const HINV_TOL: f64 = 1e-8;
const HYPERGRAD_TOL: f64 = 1e-4;
const ORACLE_INNER_TOL: f64 = 1e-10;

/// Analytic derivative that the fault-injection fixture scales by 1.1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Corruption {
    GradXF,
    GradYF,
    GradYG,
}

impl std::str::FromStr for Corruption {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "grad_x_f" => Ok(Corruption::GradXF),
            "grad_y_f" => Ok(Corruption::GradYF),
            "grad_y_g" => Ok(Corruption::GradYG),
            other => Err(Error::Parse(format!(
                "unknown derivative `{other}` (expected grad_x_f, grad_y_f or grad_y_g)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub name: &'static str,
    pub max_rel_err: f64,
    pub tol: f64,
}

impl GradCheck {
    pub fn passed(&self) -> bool {
        self.max_rel_err <= self.tol
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradReport {
    pub problem: String,
    pub checks: Vec<GradCheck>,
}

impl GradReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(GradCheck::passed)
    }

    pub fn failed(&self) -> Vec<&'static str> {
        self.checks.iter().filter(|c| !c.passed()).map(|c| c.name).collect()
    }
}

impl fmt::Display for GradReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "check,max_rel_err,tol,status")?;
        for c in &self.checks {
            let status = if c.passed() { "pass" } else { "FAIL" };
            writeln!(f, "{},{:e},{:e},{status}", c.name, c.max_rel_err, c.tol)?;
        }
        Ok(())
    }
}

/// `|a − b|` relative to the larger magnitude, floored at `scale`.
fn rel(a: f64, b: f64, scale: f64) -> f64 {
    let denom = a.abs().max(b.abs()).max(scale).max(f64::MIN_POSITIVE);
    (a - b).abs() / denom
}

/// Relative floor for directional derivatives of near-zero size.
const SCALE_FLOOR: f64 = 1e-3;

struct Corrupted<'a> {
    inner: &'a dyn BilevelProblem,
    target: Corruption,
}

impl Corrupted<'_> {
    fn scale(&self, which: Corruption, g: Result<Mat>) -> Result<Mat> {
        if which == self.target {
            g.map(|g| g * 1.1)
        } else {
            g
        }
    }
}

impl BilevelProblem for Corrupted<'_> {
    fn name(&self) -> &str {
        self.inner.name()
    }
    fn upper(&self) -> &dyn Manifold {
        self.inner.upper()
    }
    fn lower(&self) -> &dyn Manifold {
        self.inner.lower()
    }
    fn n_upper_samples(&self) -> usize {
        self.inner.n_upper_samples()
    }
    fn n_lower_samples(&self) -> usize {
        self.inner.n_lower_samples()
    }
    fn upper_objective(&self, x: &Mat, y: &Mat, batch: &Batch) -> Result<f64> {
        self.inner.upper_objective(x, y, batch)
    }
    fn lower_objective(&self, x: &Mat, y: &Mat, batch: &Batch) -> Result<f64> {
        self.inner.lower_objective(x, y, batch)
    }
    fn grad_x_f(&self, x: &Mat, y: &Mat, batch: &Batch) -> Result<Mat> {
        self.scale(Corruption::GradXF, self.inner.grad_x_f(x, y, batch))
    }
    fn grad_y_f(&self, x: &Mat, y: &Mat, batch: &Batch) -> Result<Mat> {
        self.scale(Corruption::GradYF, self.inner.grad_y_f(x, y, batch))
    }
    fn grad_y_g(&self, x: &Mat, y: &Mat, batch: &Batch) -> Result<Mat> {
        self.scale(Corruption::GradYG, self.inner.grad_y_g(x, y, batch))
    }
    fn hess_y_g(&self, x: &Mat, y: &Mat, batch: &Batch) -> Result<LinearMap<'_>> {
        self.inner.hess_y_g(x, y, batch)
    }
    fn cross_xy_g(&self, x: &Mat, y: &Mat, batch: &Batch) -> Result<LinearMap<'_>> {
        self.inner.cross_xy_g(x, y, batch)
    }
    fn hess_inv_y_g(&self, x: &Mat, y: &Mat, batch: &Batch) -> Option<Result<LinearMap<'_>>> {
        self.inner.hess_inv_y_g(x, y, batch)
    }
    fn lower_solution(&self, x: &Mat) -> Option<Result<Mat>> {
        self.inner.lower_solution(x)
    }
    fn is_minmax(&self) -> bool {
        self.inner.is_minmax()
    }
}

/// Central difference of `f` along `t ↦ exp_or_retract(z, t u)`.
fn directional(m: &dyn Manifold, z: &Mat, u: &Mat, h: f64, f: &dyn Fn(&Mat) -> Result<f64>) -> Result<f64> {
    let fp = f(&m.exp_or_retract(z, &(u * h))?)?;
    let fm = f(&m.exp_or_retract(z, &(u * -h))?)?;
    Ok((fp - fm) / (2.0 * h))
}

/// Second difference of `f` along the geodesic through `z` with velocity `u`.
fn curvature(m: &dyn Manifold, z: &Mat, u: &Mat, h: f64, f: &dyn Fn(&Mat) -> Result<f64>) -> Result<f64> {
    let fp = f(&m.exp_or_retract(z, &(u * h))?)?;
    let fm = f(&m.exp_or_retract(z, &(u * -h))?)?;
    Ok((fp - 2.0 * f(z)? + fm) / (h * h))
}

fn gradient_check(
    name: &'static str,
    m: &dyn Manifold,
    z: &Mat,
    grad: &Mat,
    f: &dyn Fn(&Mat) -> Result<f64>,
    rng: &mut ChaCha8Rng,
) -> Result<GradCheck> {
    let mut worst: f64 = 0.0;
    let scale = SCALE_FLOOR * m.norm(z, grad);
    for _ in 0..DIRECTIONS {
        let u = m.rand_tangent(z, rng);
        let fd = directional(m, z, &u, FIRST_ORDER_STEP, f)?;
        worst = worst.max(rel(fd, m.inner(z, grad, &u), scale));
    }
    Ok(GradCheck {
        name,
        max_rel_err: worst,
        tol: FIRST_ORDER_TOL,
    })
}

/// Runs every derivative check of `p` around `(x, y)`.
pub fn check_problem(p: &dyn BilevelProblem, x: &Mat, y: &Mat, seed: u64) -> Result<GradReport> {
    let (mx, my) = (p.upper(), p.lower());
    if mx.dim() > MAX_UPPER_DIM {
        return Err(Error::contract(format!(
            "upper dimension {} exceeds {MAX_UPPER_DIM}; finite-difference checks are only meant for small instances, shrink the problem",
            mx.dim()
        )));
    }
    let full = Batch::Full;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = Vec::new();

    let f_x = |xs: &Mat| p.upper_objective(xs, y, &full);
    checks.push(gradient_check("grad_x_f", mx, x, &p.grad_x_f(x, y, &full)?, &f_x, &mut rng)?);
    let f_y = |ys: &Mat| p.upper_objective(x, ys, &full);
    checks.push(gradient_check("grad_y_f", my, y, &p.grad_y_f(x, y, &full)?, &f_y, &mut rng)?);
    let g_y = |ys: &Mat| p.lower_objective(x, ys, &full);
    checks.push(gradient_check("grad_y_g", my, y, &p.grad_y_g(x, y, &full)?, &g_y, &mut rng)?);

    let h = p.hess_y_g(x, y, &full)?;
    let mut worst: f64 = 0.0;
    for _ in 0..DIRECTIONS {
        let u = my.rand_tangent(y, &mut rng);
        let v = my.rand_tangent(y, &mut rng);
        let qp = curvature(my, y, &(&u + &v), SECOND_ORDER_STEP, &g_y)?;
        let qm = curvature(my, y, &(&u - &v), SECOND_ORDER_STEP, &g_y)?;
        let hv = h.apply(&v)?;
        let scale = SCALE_FLOOR * my.norm(y, &hv);
        worst = worst.max(rel((qp - qm) / 4.0, my.inner(y, &u, &hv), scale));
    }
    checks.push(GradCheck {
        name: "hess_y_g",
        max_rel_err: worst,
        tol: SECOND_ORDER_TOL,
    });

    let cross = p.cross_xy_g(x, y, &full)?;
    let mut worst: f64 = 0.0;
    let s = SECOND_ORDER_STEP;
    for _ in 0..DIRECTIONS {
        let xi = mx.rand_tangent(x, &mut rng);
        let v = my.rand_tangent(y, &mut rng);
        let xs = [mx.exp_or_retract(x, &(&xi * s))?, mx.exp_or_retract(x, &(&xi * -s))?];
        let ys = [my.exp_or_retract(y, &(&v * s))?, my.exp_or_retract(y, &(&v * -s))?];
        let g = |i: usize, j: usize| p.lower_objective(&xs[i], &ys[j], &full);
        let mixed = (g(0, 0)? - g(0, 1)? - g(1, 0)? + g(1, 1)?) / (4.0 * s * s);
        let cv = cross.apply(&v)?;
        let an = mx.inner(x, &xi, &cv);
        let adj = my.inner(y, &cross.adjoint_apply(&xi)?, &v);
        let scale = SCALE_FLOOR * mx.norm(x, &cv).max(1e-12);
        worst = worst.max(rel(mixed, an, scale)).max(rel(adj, an, scale));
    }
    checks.push(GradCheck {
        name: "cross_xy_g",
        max_rel_err: worst,
        tol: SECOND_ORDER_TOL,
    });

    if let Some(hinv) = p.hess_inv_y_g(x, y, &full) {
        let hinv = hinv?;
        let mut worst: f64 = 0.0;
        for _ in 0..DIRECTIONS {
            let v = my.rand_tangent(y, &mut rng);
            let back = h.apply(&hinv.apply(&v)?)?;
            worst = worst.max(my.norm(y, &(back - &v)) / my.norm(y, &v));
        }
        checks.push(GradCheck {
            name: "hess_inv_y_g",
            max_rel_err: worst,
            tol: HINV_TOL,
        });
    }

    let y_star = solve_lower(p, x, y, ORACLE_INNER_TOL, 100)?;
    let analytic = estimate_hinv_or_cg(p, x, &y_star, &EstimatorBatches::full())?.value;
    let fd = fd_hypergrad_oracle(p, x, &y_star, FIRST_ORDER_STEP, ORACLE_INNER_TOL)?;
    let (na, nf) = (mx.norm(x, &analytic), mx.norm(x, &fd));
    let diff = mx.norm(x, &(&analytic - &fd));
    checks.push(GradCheck {
        name: "hypergradient",
        max_rel_err: diff / na.max(nf).max(1e-12),
        tol: HYPERGRAD_TOL,
    });

    Ok(GradReport {
        problem: p.name().to_string(),
        checks,
    })
}

/// Builds the configured problem and checks its derivatives at the starting
/// point, optionally with one analytic gradient corrupted.
pub fn check_grad(cfg: &ExperimentConfig, corrupt: Option<Corruption>) -> Result<GradReport> {
    let built = cfg.problem.build(cfg.seed)?;
    let p = built.problem.as_ref();
    match corrupt {
        Some(target) => check_problem(&Corrupted { inner: p, target }, &built.x0, &built.y0, cfg.seed),
        None => check_problem(p, &built.x0, &built.y0, cfg.seed),
    }
}
