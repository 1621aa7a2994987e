use rand::RngCore;

use super::check_shape;
use crate::error::{Error, Result};
use crate::geometry::{Manifold, TOL_MEM};
use crate::linalg::{asymmetry, expm_sym, gaussian, logm_spd, spd_inverse, sym, Mat, SpdFactors, SymEig};

/// Retraction used by [`Spd::retract`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SpdRetraction {
    /// The exponential map itself.
    #[default]
    Exp,
    /// `X + U + ½ U X⁻¹ U`.
    SecondOrder,
}

/// Symmetric positive-definite `n × n` matrices with the affine-invariant metric
/// `⟨U, V⟩_X = tr(X⁻¹ U X⁻¹ V)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spd {
    n: usize,
    eig_floor: f64,
    retraction: SpdRetraction,
}

impl Spd {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            eig_floor: 1e-12,
            retraction: SpdRetraction::Exp,
        }
    }

    pub fn with_eig_floor(mut self, eig_floor: f64) -> Self {
        self.eig_floor = eig_floor;
        self
    }

    pub fn with_retraction(mut self, retraction: SpdRetraction) -> Self {
        self.retraction = retraction;
        self
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn eig_floor(&self) -> f64 {
        self.eig_floor
    }

    fn inverse(x: &Mat) -> Mat {
        spd_inverse(x).unwrap_or_else(|_| Mat::from_element(x.nrows(), x.ncols(), f64::NAN))
    }

    /// Affine-invariant geodesic `t ↦ X^{1/2} (X^{-1/2} Y X^{-1/2})^t X^{1/2}` at `t`.
    pub fn geodesic(&self, x: &Mat, y: &Mat, t: f64) -> Result<Mat> {
        let fx = SpdFactors::new(x)?;
        let inner = SymEig::new(&fx.whiten(y));
        if inner.min_value() <= 0.0 {
            return Err(Error::numeric(format!(
                "spd geodesic: endpoint not positive definite (min eigenvalue {:.3e})",
                inner.min_value()
            )));
        }
        Ok(fx.color(&inner.map(|l| l.powf(t))))
    }
}

impl Manifold for Spd {
    fn id(&self) -> String {
        format!("spd({})", self.n)
    }

    fn dim(&self) -> usize {
        self.n * (self.n + 1) / 2
    }

    fn ambient_shape(&self) -> (usize, usize) {
        (self.n, self.n)
    }

    fn check_point(&self, x: &Mat) -> Result<()> {
        check_shape("spd point", x, self.ambient_shape())?;
        let asym = asymmetry(x);
        if asym > TOL_MEM * (1.0 + x.norm()) {
            return Err(Error::contract(format!("spd point is not symmetric (asymmetry {asym:.3e})")));
        }
        let min = SymEig::new(&sym(x)).min_value();
        if !(min > self.eig_floor) {
            return Err(Error::contract(format!(
                "spd point has min eigenvalue {min:.3e} below floor {:.3e}",
                self.eig_floor
            )));
        }
        Ok(())
    }

    fn check_tangent(&self, _x: &Mat, u: &Mat) -> Result<()> {
        check_shape("spd tangent", u, self.ambient_shape())?;
        let asym = asymmetry(u);
        if asym > TOL_MEM * (1.0 + u.norm()) {
            return Err(Error::contract(format!("spd tangent is not symmetric (asymmetry {asym:.3e})")));
        }
        Ok(())
    }

    fn inner(&self, x: &Mat, u: &Mat, v: &Mat) -> f64 {
        let xi = Self::inverse(x);
        let a = &xi * u;
        let b = &xi * v;
        (a * b).trace()
    }

    fn exp(&self, x: &Mat, u: &Mat) -> Result<Mat> {
        let fx = SpdFactors::new(x)?;
        Ok(fx.color(&expm_sym(&fx.whiten(u))?))
    }

    fn log(&self, x: &Mat, y: &Mat) -> Result<Mat> {
        let fx = SpdFactors::new(x)?;
        Ok(fx.color(&logm_spd(&fx.whiten(y))?))
    }

    fn dist(&self, x: &Mat, y: &Mat) -> Result<f64> {
        let fx = SpdFactors::new(x)?;
        Ok(logm_spd(&fx.whiten(y))?.norm())
    }

    fn retract(&self, x: &Mat, u: &Mat) -> Result<Mat> {
        match self.retraction {
            SpdRetraction::Exp => self.exp(x, u),
            SpdRetraction::SecondOrder => {
                let xi_u = spd_inverse(x)? * u;
                let y = sym(&(x + u + (u * xi_u) * 0.5));
                let min = SymEig::new(&y).min_value();
                if !(min > self.eig_floor) {
                    return Err(Error::numeric(format!(
                        "spd retraction left the cone (min eigenvalue {min:.3e})"
                    )));
                }
                Ok(y)
            }
        }
    }

    fn transport(&self, from: &Mat, to: &Mat, u: &Mat) -> Result<Mat> {
        let fx = SpdFactors::new(from)?;
        let mid = SymEig::new(&fx.whiten(to));
        if mid.min_value() <= 0.0 {
            return Err(Error::numeric("spd transport: target not positive definite"));
        }
        let e = &fx.sqrt * mid.map(f64::sqrt) * &fx.inv_sqrt;
        Ok(sym(&(&e * u * e.transpose())))
    }

    fn proj(&self, _x: &Mat, a: &Mat) -> Mat {
        sym(a)
    }

    fn proj_adjoint(&self, from: &Mat, to: &Mat, v: &Mat) -> Mat {
        let ti = Self::inverse(to);
        sym(&(from * &ti * v * &ti * from))
    }

    fn egrad_to_rgrad(&self, x: &Mat, eg: &Mat) -> Mat {
        sym(&(x * sym(eg) * x))
    }

    fn ehess_to_rhess(&self, x: &Mat, eg: &Mat, ehess_u: &Mat, u: &Mat) -> Result<Mat> {
        Ok(sym(&(x * sym(ehess_u) * x)) + sym(&(u * sym(eg) * x)))
    }

    fn rand_point(&self, rng: &mut dyn RngCore) -> Mat {
        let a = gaussian(self.n, self.n, rng);
        sym(&(&a * a.transpose() / self.n as f64 + Mat::identity(self.n, self.n) * 0.5))
    }

    fn rand_tangent(&self, x: &Mat, rng: &mut dyn RngCore) -> Mat {
        let u = sym(&gaussian(self.n, self.n, rng));
        let n = self.norm(x, &u);
        u / n
    }

    fn normalize(&self, x: &Mat) -> Result<Mat> {
        let y = sym(x);
        let min = SymEig::new(&y).min_value();
        if !(min > self.eig_floor) {
            return Err(Error::numeric(format!(
                "spd iterate lost positive definiteness (min eigenvalue {min:.3e})"
            )));
        }
        Ok(y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    fn s(v: f64) -> Mat {
        Mat::from_element(1, 1, v)
    }

    #[test]
    fn scalar_metric_and_maps() {
        let m = Spd::new(1);
        assert!((m.inner(&s(2.0), &s(2.0), &s(2.0)) - 1.0).abs() < 1e-15);
        assert!((m.exp(&s(1.0), &s(1.0)).unwrap()[(0, 0)] - E).abs() < 1e-14);
        assert!((m.log(&s(1.0), &s(E)).unwrap()[(0, 0)] - 1.0).abs() < 1e-14);
        assert!((m.dist(&s(1.0), &s(E * E)).unwrap() - 2.0).abs() < 1e-14);
        assert!((m.transport(&s(1.0), &s(4.0), &s(2.0)).unwrap()[(0, 0)] - 8.0).abs() < 1e-13);
    }

    #[test]
    fn identity_base_reduces_to_matrix_functions() {
        let m = Spd::new(2);
        let i = Mat::identity(2, 2);
        let u = Mat::from_row_slice(2, 2, &[0.3, 0.1, 0.1, -0.2]);
        let y = Mat::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        assert!((m.exp(&i, &u).unwrap() - expm_sym(&u).unwrap()).norm() < 1e-14);
        assert!((m.log(&i, &y).unwrap() - logm_spd(&y).unwrap()).norm() < 1e-14);
    }

    #[test]
    fn gradient_is_congruence() {
        let m = Spd::new(2);
        let x = Mat::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let g = Mat::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 3.0]);
        assert!((m.egrad_to_rgrad(&x, &g) - &x * &g * &x).norm() < 1e-14);
    }

    #[test]
    fn second_order_retraction_agrees_to_second_order() {
        let m = Spd::new(1).with_retraction(SpdRetraction::SecondOrder);
        let r = m.retract(&s(1.0), &s(0.01)).unwrap()[(0, 0)];
        assert!((r - 0.01f64.exp()).abs() < 1e-6);
    }

    #[test]
    fn rejects_indefinite_points() {
        let m = Spd::new(2);
        let x = Mat::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(m.check_point(&x), Err(Error::Contract(_))));
        assert!(m.exp(&x, &Mat::zeros(2, 2)).unwrap_err().is_numeric());
    }
}
