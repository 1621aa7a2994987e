use rand::RngCore;

use super::check_shape;
use crate::error::Result;
use crate::geometry::Manifold;
use crate::linalg::{gaussian, Mat};

/// Flat space of `rows × cols` matrices with the Frobenius inner product.
#[derive(Debug, Clone, PartialEq)]
pub struct Euclidean {
    rows: usize,
    cols: usize,
}

impl Euclidean {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self { rows, cols }
    }

    /// Column vectors of length `n`.
    pub fn vector(n: usize) -> Self {
        Self::new(n, 1)
    }
}

impl Manifold for Euclidean {
    fn id(&self) -> String {
        format!("euclidean({}x{})", self.rows, self.cols)
    }

    fn dim(&self) -> usize {
        self.rows * self.cols
    }

    fn ambient_shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    fn check_point(&self, x: &Mat) -> Result<()> {
        check_shape("point", x, self.ambient_shape())
    }

    fn check_tangent(&self, _x: &Mat, u: &Mat) -> Result<()> {
        check_shape("tangent", u, self.ambient_shape())
    }

    fn inner(&self, _x: &Mat, u: &Mat, v: &Mat) -> f64 {
        u.dot(v)
    }

    fn exp(&self, x: &Mat, u: &Mat) -> Result<Mat> {
        Ok(x + u)
    }

    fn log(&self, x: &Mat, y: &Mat) -> Result<Mat> {
        Ok(y - x)
    }

    fn dist(&self, x: &Mat, y: &Mat) -> Result<f64> {
        Ok((y - x).norm())
    }

    fn retract(&self, x: &Mat, u: &Mat) -> Result<Mat> {
        Ok(x + u)
    }

    fn transport(&self, _from: &Mat, _to: &Mat, u: &Mat) -> Result<Mat> {
        Ok(u.clone())
    }

    fn proj(&self, _x: &Mat, a: &Mat) -> Mat {
        a.clone()
    }

    fn proj_adjoint(&self, _from: &Mat, _to: &Mat, v: &Mat) -> Mat {
        v.clone()
    }

    fn egrad_to_rgrad(&self, _x: &Mat, eg: &Mat) -> Mat {
        eg.clone()
    }

    fn ehess_to_rhess(&self, _x: &Mat, _eg: &Mat, ehess_u: &Mat, _u: &Mat) -> Result<Mat> {
        Ok(ehess_u.clone())
    }

    fn rand_point(&self, rng: &mut dyn RngCore) -> Mat {
        gaussian(self.rows, self.cols, rng)
    }

    fn rand_tangent(&self, _x: &Mat, rng: &mut dyn RngCore) -> Mat {
        let u = gaussian(self.rows, self.cols, rng);
        let n = u.norm();
        u / n
    }

    fn normalize(&self, x: &Mat) -> Result<Mat> {
        Ok(x.clone())
    }
}
