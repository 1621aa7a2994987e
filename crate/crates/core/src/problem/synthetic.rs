use rand::RngCore;

use super::{Batch, BilevelProblem};
use crate::error::{Error, Result};
use crate::geometry::{LinearMap, Manifold};
use crate::linalg::{gaussian, lyapunov_solve_eig, spd_inverse, sym, Mat, SpdFactors, SymEig};
use crate::manifolds::{Spd, Stiefel};

/// Metric-learning alignment problem over `St(d, r) × SPD(d)`:
///
/// ```text
/// min_W  −tr(M* Xᵀ Y Wᵀ)
/// M* = argmin_M ⟨M, XᵀX⟩ + ⟨M⁻¹, W YᵀY Wᵀ + ν I⟩
/// ```
#[derive(Debug, Clone)]
pub struct SyntheticStiefelSpd {
    upper: Stiefel,
    lower: Spd,
    a: Mat,
    c: Mat,
    e: Mat,
    nu: f64,
}

impl SyntheticStiefelSpd {
    pub fn new(x: &Mat, y: &Mat, nu: f64) -> Result<Self> {
        Self::with_lower(x, y, nu, Spd::new(x.ncols()))
    }

    /// Same problem with a custom lower manifold (e.g. a different SPD retraction).
    pub fn with_lower(x: &Mat, y: &Mat, nu: f64, lower: Spd) -> Result<Self> {
        let (n, d) = x.shape();
        let r = y.ncols();
        if y.nrows() != n {
            return Err(Error::contract("X and Y must have the same number of rows"));
        }
        if !(n >= d && d >= r) {
            return Err(Error::contract(format!("need n >= d >= r, got n={n}, d={d}, r={r}")));
        }
        if !(nu > 0.0) {
            return Err(Error::contract("nu must be positive"));
        }
        if lower.size() != d {
            return Err(Error::contract("lower manifold size must equal d"));
        }
        let a = sym(&x.tr_mul(x));
        let eig = SymEig::new(&a);
        if eig.min_value() <= 1e-12 * eig.max_value().max(1.0) {
            log::warn!("XᵀX is (nearly) singular: lower-level strong convexity may vanish");
        }
        Ok(Self {
            upper: Stiefel::new(d, r)?,
            lower,
            a,
            c: sym(&y.tr_mul(y)),
            e: x.tr_mul(y),
            nu,
        })
    }

    /// Gaussian `X` (`n×d`) and `Y` (`n×r`), each scaled to unit Frobenius norm.
    pub fn generate(n: usize, d: usize, r: usize, nu: f64, rng: &mut dyn RngCore) -> Result<Self> {
        let (x, y) = Self::generate_data(n, d, r, rng);
        Self::new(&x, &y, nu)
    }

    pub fn generate_data(n: usize, d: usize, r: usize, rng: &mut dyn RngCore) -> (Mat, Mat) {
        let x = gaussian(n, d, rng);
        let y = gaussian(n, r, rng);
        let (xn, yn) = (x.norm(), y.norm());
        (x / xn, y / yn)
    }

    pub fn stiefel(&self) -> &Stiefel {
        &self.upper
    }

    pub fn spd(&self) -> &Spd {
        &self.lower
    }

    fn b(&self, w: &Mat) -> Mat {
        let d = w.nrows();
        sym(&(w * &self.c * w.transpose())) + Mat::identity(d, d) * self.nu
    }
}

impl BilevelProblem for SyntheticStiefelSpd {
    fn name(&self) -> &str {
        "synthetic"
    }

    fn upper(&self) -> &dyn Manifold {
        &self.upper
    }

    fn lower(&self) -> &dyn Manifold {
        &self.lower
    }

    fn upper_objective(&self, w: &Mat, m: &Mat, batch: &Batch) -> Result<f64> {
        batch.require_full(self.name())?;
        Ok(-(m * &self.e).dot(w))
    }

    fn lower_objective(&self, w: &Mat, m: &Mat, batch: &Batch) -> Result<f64> {
        batch.require_full(self.name())?;
        Ok(m.dot(&self.a) + spd_inverse(m)?.dot(&self.b(w)))
    }

    fn grad_x_f(&self, w: &Mat, m: &Mat, batch: &Batch) -> Result<Mat> {
        batch.require_full(self.name())?;
        Ok(self.upper.egrad_to_rgrad(w, &-(m * &self.e)))
    }

    fn grad_y_f(&self, w: &Mat, m: &Mat, batch: &Batch) -> Result<Mat> {
        batch.require_full(self.name())?;
        Ok(self.lower.egrad_to_rgrad(m, &-sym(&(&self.e * w.transpose()))))
    }

    fn grad_y_g(&self, w: &Mat, m: &Mat, batch: &Batch) -> Result<Mat> {
        batch.require_full(self.name())?;
        Ok(sym(&(m * &self.a * m)) - self.b(w))
    }

    fn hess_y_g(&self, w: &Mat, m: &Mat, batch: &Batch) -> Result<LinearMap<'_>> {
        batch.require_full(self.name())?;
        let mi = spd_inverse(m)?;
        let am = &self.a * m;
        let mib = &mi * self.b(w);
        Ok(LinearMap::self_adjoint(m.clone(), move |u| {
            Ok(sym(&(u * &am)) + sym(&(u * &mib)))
        }))
    }

    fn cross_xy_g(&self, w: &Mat, m: &Mat, batch: &Batch) -> Result<LinearMap<'_>> {
        batch.require_full(self.name())?;
        let mi = spd_inverse(m)?;
        let wc = w * &self.c;
        let wc2 = wc.clone();
        let w0 = w.clone();
        Ok(LinearMap::new(
            m.clone(),
            w.clone(),
            move |v| Ok(self.upper.proj(&w0, &(&mi * v * &mi * &wc * -2.0))),
            move |xi| Ok(-sym(&(xi * wc2.transpose())) * 2.0),
        ))
    }

    fn hess_inv_y_g(&self, w: &Mat, m: &Mat, batch: &Batch) -> Option<Result<LinearMap<'_>>> {
        let build = || -> Result<LinearMap<'_>> {
            batch.require_full(self.name())?;
            let f = SpdFactors::new(m)?;
            let k = f.color(&self.a) + f.whiten(&self.b(w));
            let eig = SymEig::new(&k);
            if eig.min_value() <= 0.0 {
                return Err(Error::numeric("lower Hessian is not positive definite"));
            }
            Ok(LinearMap::self_adjoint(m.clone(), move |u| {
                let g = lyapunov_solve_eig(&eig, &(f.whiten(u) * 2.0));
                Ok(f.color(&g))
            }))
        };
        Some(build())
    }

    fn lower_solution(&self, w: &Mat) -> Option<Result<Mat>> {
        let solve = || -> Result<Mat> {
            let fa = SpdFactors::new(&self.a)?;
            let inner = SpdFactors::new(&fa.color(&self.b(w)))?;
            Ok(sym(&(&fa.inv_sqrt * inner.sqrt * &fa.inv_sqrt)))
        };
        Some(solve())
    }
}
