//! Conjugate gradient on a single tangent space.

use crate::error::{Error, Result};
use crate::geometry::{LinearMap, Manifold};
use crate::linalg::Mat;

/// Settings for [`tscg`].
#[derive(Debug, Clone, PartialEq)]
pub struct TscgConfig {
    pub max_iters: usize,
    pub residual_tol: f64,
    /// Initial iterate; zero when absent.
    pub warm_start: Option<Mat>,
}

impl Default for TscgConfig {
    fn default() -> Self {
        Self {
            max_iters: 50,
            residual_tol: 1e-10,
            warm_start: None,
        }
    }
}

impl TscgConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::contract("conjugate gradient needs at least one iteration"));
        }
        if !(self.residual_tol > 0.0) {
            return Err(Error::contract("conjugate gradient residual tolerance must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TscgResult {
    pub solution: Mat,
    pub iterations: usize,
    /// `‖G − H[solution]‖` recomputed from the returned solution.
    pub residual_norm: f64,
}

const BREAKDOWN: f64 = 1e-300;

/// Solves `H[v] = G` on `T_base M` for self-adjoint positive-definite `H`,
/// using the Riemannian metric at `base` throughout.
pub fn tscg(m: &dyn Manifold, base: &Mat, h: &LinearMap<'_>, g: &Mat, cfg: &TscgConfig) -> Result<TscgResult> {
    cfg.validate()?;
    let inner = |a: &Mat, b: &Mat| m.inner(base, a, b);
    let (mut v, mut r) = match &cfg.warm_start {
        Some(v0) => {
            let r = g - h.apply(v0)?;
            (v0.clone(), r)
        }
        None => (Mat::zeros(g.nrows(), g.ncols()), g.clone()),
    };
    let mut rr = inner(&r, &r);
    let mut p = r.clone();
    let mut iterations = 0;
    while iterations < cfg.max_iters && rr.sqrt() > cfg.residual_tol && rr >= BREAKDOWN {
        let hp = h.apply(&p)?;
        let php = inner(&p, &hp);
        if !(php > 0.0) {
            let pp = inner(&p, &p);
            return Err(Error::contract(format!(
                "operator is not positive definite (Rayleigh quotient {:.3e})",
                php / pp
            )));
        }
        let step = rr / php;
        v += &p * step;
        r -= &hp * step;
        let rr_next = inner(&r, &r);
        iterations += 1;
        p = &r + &p * (rr_next / rr);
        rr = rr_next;
    }
    let residual = g - h.apply(&v)?;
    Ok(TscgResult {
        residual_norm: m.norm(base, &residual),
        solution: v,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifolds::Euclidean;

    fn col(v: &[f64]) -> Mat {
        Mat::from_column_slice(v.len(), 1, v)
    }

    #[test]
    fn identity_solves_in_one_step() {
        let m = Euclidean::vector(3);
        let x = col(&[0.0, 0.0, 0.0]);
        let g = col(&[1.0, -2.0, 0.5]);
        let out = tscg(&m, &x, &LinearMap::identity(x.clone()), &g, &TscgConfig::default()).unwrap();
        assert_eq!(out.iterations, 1);
        assert!((out.solution - g).norm() < 1e-15);
    }

    #[test]
    fn two_dimensional_exactness() {
        let m = Euclidean::vector(2);
        let x = col(&[0.0, 0.0]);
        let d = Mat::from_diagonal(&nalgebra::dvector![1.0, 2.0]);
        let h = LinearMap::self_adjoint(x.clone(), move |u| Ok(&d * u));
        let out = tscg(&m, &x, &h, &col(&[1.0, 2.0]), &TscgConfig::default()).unwrap();
        assert!(out.iterations <= 2);
        assert!((out.solution - col(&[1.0, 1.0])).norm() < 1e-12);
    }

    #[test]
    fn zero_rhs_takes_no_iterations() {
        let m = Euclidean::vector(2);
        let x = col(&[0.0, 0.0]);
        let out = tscg(&m, &x, &LinearMap::identity(x.clone()), &col(&[0.0, 0.0]), &TscgConfig::default()).unwrap();
        assert_eq!(out.iterations, 0);
        assert_eq!(out.solution, col(&[0.0, 0.0]));
    }

    #[test]
    fn indefinite_operator_is_rejected() {
        let m = Euclidean::vector(2);
        let x = col(&[0.0, 0.0]);
        let h = LinearMap::self_adjoint(x.clone(), |u| Ok(-u));
        let err = tscg(&m, &x, &h, &col(&[1.0, 0.0]), &TscgConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Contract(ref s) if s.contains("Rayleigh")));
    }

    #[test]
    fn zero_iteration_budget_is_rejected() {
        let cfg = TscgConfig {
            max_iters: 0,
            ..TscgConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}
