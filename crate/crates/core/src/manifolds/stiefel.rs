use rand::RngCore;

use super::check_shape;
use crate::error::{Error, Result};
use crate::geometry::{Manifold, TOL_MEM};
use crate::linalg::{gaussian, qf, sym, Mat};

/// Orthonormal `d × r` frames with the embedded Frobenius metric.
///
/// Only the QR retraction is provided; `exp` and `log` are unsupported and the
/// transport is the non-isometric projection vector transport.
#[derive(Debug, Clone, PartialEq)]
pub struct Stiefel {
    d: usize,
    r: usize,
}

impl Stiefel {
    pub fn new(d: usize, r: usize) -> Result<Self> {
        if d < r || r == 0 {
            return Err(Error::contract(format!("stiefel needs d >= r >= 1, got d={d}, r={r}")));
        }
        Ok(Self { d, r })
    }
}

impl Manifold for Stiefel {
    fn id(&self) -> String {
        format!("stiefel({},{})", self.d, self.r)
    }

    fn dim(&self) -> usize {
        self.d * self.r - self.r * (self.r + 1) / 2
    }

    fn ambient_shape(&self) -> (usize, usize) {
        (self.d, self.r)
    }

    fn check_point(&self, x: &Mat) -> Result<()> {
        check_shape("stiefel point", x, self.ambient_shape())?;
        let err = (x.tr_mul(x) - Mat::identity(self.r, self.r)).norm();
        if err > TOL_MEM {
            return Err(Error::contract(format!("stiefel point is not orthonormal (‖WᵀW − I‖ = {err:.3e})")));
        }
        Ok(())
    }

    fn check_tangent(&self, x: &Mat, u: &Mat) -> Result<()> {
        check_shape("stiefel tangent", u, self.ambient_shape())?;
        let err = sym(&x.tr_mul(u)).norm();
        if err > TOL_MEM * (1.0 + u.norm()) {
            return Err(Error::contract(format!("stiefel tangent violates sym(WᵀU) = 0 ({err:.3e})")));
        }
        Ok(())
    }

    fn inner(&self, _x: &Mat, u: &Mat, v: &Mat) -> f64 {
        u.dot(v)
    }

    fn has_exp(&self) -> bool {
        false
    }

    fn exp(&self, _x: &Mat, _u: &Mat) -> Result<Mat> {
        Err(Error::unsupported("stiefel exponential map"))
    }

    fn log(&self, _x: &Mat, _y: &Mat) -> Result<Mat> {
        Err(Error::unsupported("stiefel logarithm"))
    }

    fn retract(&self, x: &Mat, u: &Mat) -> Result<Mat> {
        qf(&(x + u))
    }

    fn transport(&self, _from: &Mat, to: &Mat, u: &Mat) -> Result<Mat> {
        Ok(self.proj(to, u))
    }

    fn transport_is_isometric(&self) -> bool {
        false
    }

    fn proj(&self, x: &Mat, a: &Mat) -> Mat {
        a - x * sym(&x.tr_mul(a))
    }

    fn proj_adjoint(&self, from: &Mat, _to: &Mat, v: &Mat) -> Mat {
        self.proj(from, v)
    }

    fn egrad_to_rgrad(&self, x: &Mat, eg: &Mat) -> Mat {
        self.proj(x, eg)
    }

    fn ehess_to_rhess(&self, x: &Mat, eg: &Mat, ehess_u: &Mat, u: &Mat) -> Result<Mat> {
        Ok(self.proj(x, &(ehess_u - u * sym(&x.tr_mul(eg)))))
    }

    fn rand_point(&self, rng: &mut dyn RngCore) -> Mat {
        loop {
            if let Ok(q) = qf(&gaussian(self.d, self.r, rng)) {
                return q;
            }
        }
    }

    fn rand_tangent(&self, x: &Mat, rng: &mut dyn RngCore) -> Mat {
        let u = self.proj(x, &gaussian(self.d, self.r, rng));
        let n = u.norm();
        u / n
    }

    fn normalize(&self, x: &Mat) -> Result<Mat> {
        qf(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn st21_retraction_and_projection() {
        let m = Stiefel::new(2, 1).unwrap();
        let x = Mat::from_column_slice(2, 1, &[1.0, 0.0]);
        let u = Mat::from_column_slice(2, 1, &[0.0, 1.0]);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((m.retract(&x, &u).unwrap() - Mat::from_column_slice(2, 1, &[h, h])).norm() < 1e-15);
        let a = Mat::from_column_slice(2, 1, &[3.0, 5.0]);
        assert_eq!(m.proj(&x, &a), Mat::from_column_slice(2, 1, &[0.0, 5.0]));
        assert_eq!(m.retract(&x, &Mat::zeros(2, 1)).unwrap(), x);
    }

    #[test]
    fn exp_and_log_are_unsupported() {
        let m = Stiefel::new(3, 2).unwrap();
        let x = Mat::identity(3, 2);
        assert!(matches!(m.exp(&x, &Mat::zeros(3, 2)), Err(Error::Unsupported(_))));
        assert!(matches!(m.log(&x, &x), Err(Error::Unsupported(_))));
        assert!(!m.transport_is_isometric());
    }

    #[test]
    fn rejects_wide_shape() {
        assert!(Stiefel::new(2, 3).is_err());
    }
}
