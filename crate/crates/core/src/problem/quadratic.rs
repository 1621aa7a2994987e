use super::{Batch, BilevelProblem};
use crate::error::{Error, Result};
use crate::geometry::{LinearMap, Manifold};
use crate::linalg::Mat;
use crate::manifolds::Euclidean;

/// Euclidean oracle `g = ½‖y − Ax‖²`, `f = ½‖y‖²` with hypergradient `AᵀA x`.
#[derive(Debug, Clone)]
pub struct QuadraticOracle {
    a: Mat,
    space: Euclidean,
}

impl QuadraticOracle {
    pub fn new(a: Mat) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::contract(format!("quadratic oracle needs square A, got {:?}", a.shape())));
        }
        let space = Euclidean::vector(a.nrows());
        Ok(Self { a, space })
    }

    pub fn matrix(&self) -> &Mat {
        &self.a
    }

    /// Closed-form hypergradient `AᵀA x`.
    pub fn exact_hypergradient(&self, x: &Mat) -> Mat {
        self.a.tr_mul(&(&self.a * x))
    }
}

impl BilevelProblem for QuadraticOracle {
    fn name(&self) -> &str {
        "quadratic"
    }

    fn upper(&self) -> &dyn Manifold {
        &self.space
    }

    fn lower(&self) -> &dyn Manifold {
        &self.space
    }

    fn upper_objective(&self, _x: &Mat, y: &Mat, batch: &Batch) -> Result<f64> {
        batch.require_full(self.name())?;
        Ok(0.5 * y.norm_squared())
    }

    fn lower_objective(&self, x: &Mat, y: &Mat, batch: &Batch) -> Result<f64> {
        batch.require_full(self.name())?;
        Ok(0.5 * (y - &self.a * x).norm_squared())
    }

    fn grad_x_f(&self, x: &Mat, _y: &Mat, batch: &Batch) -> Result<Mat> {
        batch.require_full(self.name())?;
        Ok(Mat::zeros(x.nrows(), 1))
    }

    fn grad_y_f(&self, _x: &Mat, y: &Mat, batch: &Batch) -> Result<Mat> {
        batch.require_full(self.name())?;
        Ok(y.clone())
    }

    fn grad_y_g(&self, x: &Mat, y: &Mat, batch: &Batch) -> Result<Mat> {
        batch.require_full(self.name())?;
        Ok(y - &self.a * x)
    }

    fn hess_y_g(&self, _x: &Mat, y: &Mat, batch: &Batch) -> Result<LinearMap<'_>> {
        batch.require_full(self.name())?;
        Ok(LinearMap::identity(y.clone()))
    }

    fn cross_xy_g(&self, x: &Mat, y: &Mat, batch: &Batch) -> Result<LinearMap<'_>> {
        batch.require_full(self.name())?;
        let a = &self.a;
        Ok(LinearMap::new(
            y.clone(),
            x.clone(),
            move |v| Ok(-a.tr_mul(v)),
            move |u| Ok(-(a * u)),
        ))
    }

    fn hess_inv_y_g(&self, _x: &Mat, y: &Mat, batch: &Batch) -> Option<Result<LinearMap<'_>>> {
        Some(batch.require_full(self.name()).map(|_| LinearMap::identity(y.clone())))
    }

    fn lower_solution(&self, x: &Mat) -> Option<Result<Mat>> {
        Some(Ok(&self.a * x))
    }
}
