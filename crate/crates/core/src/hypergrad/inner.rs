use crate::error::{Error, Result};
use crate::geometry::MapMode;
use crate::linalg::Mat;
use crate::problem::{Batch, BilevelProblem};
use crate::tscg::{tscg, TscgConfig};

/// Lower iterates `y^0, …, y^S` of one inner loop and the batch used at each step.
#[derive(Debug, Clone)]
pub struct InnerTape {
    pub points: Vec<Mat>,
    pub batches: Vec<Batch>,
    pub eta: f64,
    pub map_mode: MapMode,
    /// Norm of `G_y g` at the last step taken.
    pub last_grad_norm: f64,
}

impl InnerTape {
    pub fn last(&self) -> &Mat {
        self.points.last().expect("tape holds the initial point")
    }

    pub fn steps(&self) -> usize {
        self.batches.len()
    }
}

/// Runs `steps` Riemannian gradient steps on `g(x, ·)` from `y0`, drawing the
/// batch for each step from `next_batch`.
pub fn inner_loop(
    p: &dyn BilevelProblem,
    x: &Mat,
    y0: &Mat,
    steps: usize,
    eta: f64,
    map_mode: MapMode,
    mut next_batch: impl FnMut() -> Batch,
) -> Result<InnerTape> {
    let m = p.lower();
    let mut points = Vec::with_capacity(steps + 1);
    let mut batches = Vec::with_capacity(steps);
    points.push(y0.clone());
    let mut last_grad_norm = f64::NAN;
    for _ in 0..steps {
        let y = points.last().expect("nonempty");
        let batch = next_batch();
        let g = p.grad_y_g(x, y, &batch)?;
        last_grad_norm = m.norm(y, &g);
        if !last_grad_norm.is_finite() {
            return Err(Error::numeric("inner gradient is not finite"));
        }
        let next = map_mode.step(m, y, &(g * -eta))?;
        points.push(next);
        batches.push(batch);
    }
    Ok(InnerTape {
        points,
        batches,
        eta,
        map_mode,
        last_grad_norm,
    })
}

/// Near-exact lower solution: the closed form when the problem has one,
/// otherwise Riemannian Newton steps with CG from `y0` until `‖G_y g‖ ≤ tol`.
pub fn solve_lower(p: &dyn BilevelProblem, x: &Mat, y0: &Mat, tol: f64, max_iters: usize) -> Result<Mat> {
    if let Some(y) = p.lower_solution(x) {
        return y;
    }
    let m = p.lower();
    let mut y = y0.clone();
    let cg = TscgConfig {
        max_iters: 10 * m.dim().max(5),
        residual_tol: tol * 1e-2,
        warm_start: None,
    };
    let mut gnorm = f64::INFINITY;
    for _ in 0..max_iters {
        let g = p.grad_y_g(x, &y, &Batch::Full)?;
        gnorm = m.norm(&y, &g);
        if gnorm <= tol {
            return Ok(y);
        }
        let h = p.hess_y_g(x, &y, &Batch::Full)?;
        let step = tscg(m, &y, &h, &g, &cg)?.solution;
        y = MapMode::Exponential.step(m, &y, &(-step))?;
    }
    Err(Error::numeric(format!(
        "lower solve did not reach tolerance {tol:.1e} (gradient norm {gnorm:.3e})"
    )))
}
