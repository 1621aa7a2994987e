use crate::error::Result;
use crate::geometry::tangent_basis;
use crate::linalg::Mat;
use crate::problem::{Batch, BilevelProblem, EstimatorBatches};

use super::{estimate_hinv_or_cg, solve_lower};

/// Newton iteration cap for lower solves inside the oracles.
const LOWER_NEWTON_ITERS: usize = 100;

/// Central finite-difference hypergradient of `F(x) = f(x, y*(x))` along an
/// orthonormal tangent basis, stepping with `exp_or_retract`. `y_hint` seeds the
/// lower solves when the problem has no closed-form solution.
pub fn fd_hypergrad_oracle(
    p: &dyn BilevelProblem,
    x: &Mat,
    y_hint: &Mat,
    h: f64,
    inner_tol: f64,
) -> Result<Mat> {
    let mx = p.upper();
    let y0 = solve_lower(p, x, y_hint, inner_tol, LOWER_NEWTON_ITERS)?;
    let value_at = |u: &Mat| -> Result<f64> {
        let xs = mx.exp_or_retract(x, u)?;
        let ys = solve_lower(p, &xs, &y0, inner_tol, LOWER_NEWTON_ITERS)?;
        p.upper_objective(&xs, &ys, &Batch::Full)
    };
    let mut grad = mx.zero_tangent(x);
    for e in tangent_basis(mx, x) {
        let fp = value_at(&(&e * h))?;
        let fm = value_at(&(&e * -h))?;
        grad += e * ((fp - fm) / (2.0 * h));
    }
    Ok(grad)
}

/// Full-batch hypergradient at the (near-)exact lower solution, through the
/// inverse Hessian or tight CG.
pub fn reference_hypergradient(p: &dyn BilevelProblem, x: &Mat, y_hint: &Mat, inner_tol: f64) -> Result<Mat> {
    let y = solve_lower(p, x, y_hint, inner_tol, LOWER_NEWTON_ITERS)?;
    Ok(estimate_hinv_or_cg(p, x, &y, &EstimatorBatches::full())?.value)
}
