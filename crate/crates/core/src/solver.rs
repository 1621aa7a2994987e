//! Outer loops: deterministic, stochastic and min-max hypergradient descent.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::MapMode;
use crate::hypergrad::{estimate, inner_loop, reference_hypergradient, EstimatorConfig};
use crate::linalg::Mat;
use crate::problem::{require_stochastic, sample_batch, Batch, BatchSizes, BilevelProblem, EstimatorBatches};

/// Lower-solve tolerance used for reference hypergradients.
const REFERENCE_INNER_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub eta_x: f64,
    pub eta_y: f64,
    /// Inner iterations per outer step (`S`).
    pub inner_steps: usize,
    /// Outer iterations (`K`).
    pub outer_iters: usize,
    pub estimator: EstimatorConfig,
    /// Applied to both levels.
    pub map_mode: MapMode,
    /// Mini-batch sizes for the stochastic solver.
    pub batch_sizes: Option<BatchSizes>,
    pub seed: u64,
    /// Record the distance to a reference hypergradient.
    pub record_reference_error: bool,
    /// Reference errors are computed every this many iterations.
    pub record_every: usize,
    /// Stop once the hypergradient norm falls to this value.
    pub grad_tol: Option<f64>,
    /// Record elapsed wall time; zeros otherwise so traces are reproducible byte for byte.
    pub wall_clock: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            eta_x: 0.5,
            eta_y: 0.5,
            inner_steps: 20,
            outer_iters: 200,
            estimator: EstimatorConfig::default(),
            map_mode: MapMode::Exponential,
            batch_sizes: None,
            seed: 0,
            record_reference_error: false,
            record_every: 10,
            grad_tol: None,
            wall_clock: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta_x >= 0.0 && self.eta_x.is_finite()) {
            return Err(Error::contract("eta_x must be a finite nonnegative number"));
        }
        if !(self.eta_y > 0.0 && self.eta_y.is_finite()) {
            return Err(Error::contract("eta_y must be positive"));
        }
        if self.inner_steps == 0 || self.outer_iters == 0 {
            return Err(Error::contract("S and K must be at least 1"));
        }
        if self.record_every == 0 {
            return Err(Error::contract("record_every must be at least 1"));
        }
        if let Some(b) = &self.batch_sizes {
            if [b.b1, b.b2, b.b3, b.b4].contains(&0) {
                return Err(Error::contract("batch sizes must be positive"));
            }
        }
        self.estimator.validate()
    }
}

/// One outer iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub k: usize,
    /// Full-batch `f(x_k, y_{k+1})`.
    pub upper_obj: f64,
    pub hypergrad_norm: f64,
    pub est_err: Option<f64>,
    /// Full-batch `‖G_y g(x_k, y_{k+1})‖`.
    pub inner_grad_norm: f64,
    pub wall_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub records: Vec<TraceRecord>,
    pub final_x: Mat,
    pub final_y: Mat,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn objectives(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.upper_obj).collect()
    }

    /// `min_k ‖Ĝ F(x_k)‖²`.
    pub fn min_sq_hypergrad(&self) -> f64 {
        self.records
            .iter()
            .map(|r| r.hypergrad_norm * r.hypergrad_norm)
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mode {
    Deterministic,
    Stochastic,
    MinMax,
}

/// Deterministic hypergradient descent with full-batch derivatives.
pub fn rhgd(p: &dyn BilevelProblem, cfg: &SolverConfig, x0: &Mat, y0: &Mat) -> Result<Trace> {
    run(p, cfg, x0, y0, Mode::Deterministic)
}

/// Stochastic hypergradient descent: `B1` is redrawn every inner step, `B2`
/// serves both upper gradients, `B3` the cross term and `B4` the Hessian.
pub fn rshgd(p: &dyn BilevelProblem, cfg: &SolverConfig, x0: &Mat, y0: &Mat) -> Result<Trace> {
    require_stochastic(p)?;
    if cfg.batch_sizes.is_none() {
        return Err(Error::contract("stochastic solver needs batch sizes"));
    }
    run(p, cfg, x0, y0, Mode::Stochastic)
}

/// Alternating descent-ascent for `g = −f`, using `G_x f(x_k, y_{k+1})` as
/// the hypergradient.
pub fn rhgd_minmax(p: &dyn BilevelProblem, cfg: &SolverConfig, x0: &Mat, y0: &Mat) -> Result<Trace> {
    if !p.is_minmax() {
        return Err(Error::contract(format!("problem {} is not a min-max problem", p.name())));
    }
    run(p, cfg, x0, y0, Mode::MinMax)
}

fn run(p: &dyn BilevelProblem, cfg: &SolverConfig, x0: &Mat, y0: &Mat, mode: Mode) -> Result<Trace> {
    cfg.validate()?;
    if cfg.batch_sizes.is_some() && !p.is_stochastic() {
        return Err(Error::contract(format!("batch sizes given for deterministic problem {}", p.name())));
    }
    let (mx, my) = (p.upper(), p.lower());
    mx.check_point(x0)?;
    my.check_point(y0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let sizes = match mode {
        Mode::Stochastic => cfg.batch_sizes,
        _ => None,
    };
    let start = Instant::now();
    let mut x = x0.clone();
    let mut y = y0.clone();
    let mut records = Vec::with_capacity(cfg.outer_iters);
    for k in 0..cfg.outer_iters {
        let (next_x, next_y, record) =
            outer_step(p, cfg, &x, &y, k, mode, sizes.as_ref(), &mut rng).map_err(|e| e.at_iteration(k))?;
        let wall_s = if cfg.wall_clock { start.elapsed().as_secs_f64() } else { 0.0 };
        log::debug!(
            "k={k} F={:.6e} |G|={:.3e} |Gy g|={:.3e}",
            record.upper_obj,
            record.hypergrad_norm,
            record.inner_grad_norm
        );
        let stop = cfg.grad_tol.is_some_and(|tol| record.hypergrad_norm <= tol);
        records.push(TraceRecord { wall_s, ..record });
        y = next_y;
        if stop {
            break;
        }
        x = next_x;
    }
    Ok(Trace {
        records,
        final_x: x,
        final_y: y,
    })
}

#[allow(clippy::too_many_arguments)]
fn outer_step(
    p: &dyn BilevelProblem,
    cfg: &SolverConfig,
    x: &Mat,
    y: &Mat,
    k: usize,
    mode: Mode,
    sizes: Option<&BatchSizes>,
    rng: &mut ChaCha8Rng,
) -> Result<(Mat, Mat, TraceRecord)> {
    let (mx, my) = (p.upper(), p.lower());
    let n_lower = p.n_lower_samples();
    let tape = inner_loop(p, x, y, cfg.inner_steps, cfg.eta_y, cfg.map_mode, || match sizes {
        Some(b) => sample_batch(n_lower, b.b1, rng),
        None => Batch::Full,
    })?;
    let y_next = tape.last().clone();
    let batches = match sizes {
        Some(b) => EstimatorBatches::sample(p, b, rng)?,
        None => EstimatorBatches::full(),
    };
    let hypergrad = match mode {
        Mode::MinMax => p.grad_x_f(x, &y_next, &batches.upper)?,
        _ => estimate(p, x, &y_next, &cfg.estimator, &batches, Some(&tape))?.value,
    };
    let hypergrad_norm = mx.norm(x, &hypergrad);
    if !hypergrad_norm.is_finite() {
        return Err(Error::numeric("hypergradient is not finite"));
    }
    let est_err = if cfg.record_reference_error && k.is_multiple_of(cfg.record_every) {
        let reference = reference_hypergradient(p, x, &y_next, REFERENCE_INNER_TOL)?;
        Some(mx.norm(x, &(&hypergrad - reference)))
    } else {
        None
    };
    let upper_obj = p.upper_objective(x, &y_next, &Batch::Full)?;
    let inner_grad_norm = my.norm(&y_next, &p.grad_y_g(x, &y_next, &Batch::Full)?);
    let x_next = if cfg.eta_x == 0.0 {
        x.clone()
    } else {
        cfg.map_mode.step(mx, x, &(hypergrad * -cfg.eta_x))?
    };
    let record = TraceRecord {
        k,
        upper_obj,
        hypergrad_norm,
        est_err,
        inner_grad_norm,
        wall_s: 0.0,
    };
    Ok((x_next, y_next, record))
}
