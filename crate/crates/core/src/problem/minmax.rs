use super::{Batch, BilevelProblem};
use crate::error::{Error, Result};
use crate::geometry::{LinearMap, Manifold};
use crate::linalg::Mat;
use crate::manifolds::Euclidean;

/// A saddle function `f(x, y)`, strongly concave in `y`.
pub trait SaddleFunction: Send + Sync {
    fn upper(&self) -> &dyn Manifold;
    fn lower(&self) -> &dyn Manifold;
    fn value(&self, x: &Mat, y: &Mat) -> Result<f64>;
    fn grad_x(&self, x: &Mat, y: &Mat) -> Result<Mat>;
    fn grad_y(&self, x: &Mat, y: &Mat) -> Result<Mat>;
    /// Riemannian Hessian of `f` in `y`.
    fn hess_y(&self, x: &Mat, y: &Mat) -> Result<LinearMap<'_>>;
    /// `G²_xy f : T_y → T_x` with adjoint `G²_yx f`.
    fn cross_xy(&self, x: &Mat, y: &Mat) -> Result<LinearMap<'_>>;
    /// Inverse of [`SaddleFunction::hess_y`] when available in closed form.
    fn hess_inv_y(&self, _x: &Mat, _y: &Mat) -> Option<Result<LinearMap<'_>>> {
        None
    }
    fn maximizer(&self, _x: &Mat) -> Option<Result<Mat>> {
        None
    }
}

/// `min_x max_y f(x, y)` as a bilevel problem with `g = −f`.
pub struct MinMax<S> {
    f: S,
}

impl<S: SaddleFunction> MinMax<S> {
    pub fn new(f: S) -> Self {
        Self { f }
    }

    pub fn saddle(&self) -> &S {
        &self.f
    }
}

fn negate(map: LinearMap<'_>) -> LinearMap<'_> {
    let dom = map.domain_base().clone();
    let cod = map.codomain_base().clone();
    let map = std::rc::Rc::new(map);
    let adj = map.clone();
    LinearMap::new(dom, cod, move |u| Ok(-map.apply(u)?), move |v| Ok(-adj.adjoint_apply(v)?))
}

impl<S: SaddleFunction> BilevelProblem for MinMax<S> {
    fn name(&self) -> &str {
        "minmax"
    }

    fn upper(&self) -> &dyn Manifold {
        self.f.upper()
    }

    fn lower(&self) -> &dyn Manifold {
        self.f.lower()
    }

    fn upper_objective(&self, x: &Mat, y: &Mat, batch: &Batch) -> Result<f64> {
        batch.require_full(self.name())?;
        self.f.value(x, y)
    }

    fn lower_objective(&self, x: &Mat, y: &Mat, batch: &Batch) -> Result<f64> {
        batch.require_full(self.name())?;
        Ok(-self.f.value(x, y)?)
    }

    fn grad_x_f(&self, x: &Mat, y: &Mat, batch: &Batch) -> Result<Mat> {
        batch.require_full(self.name())?;
        self.f.grad_x(x, y)
    }

    fn grad_y_f(&self, x: &Mat, y: &Mat, batch: &Batch) -> Result<Mat> {
        batch.require_full(self.name())?;
        self.f.grad_y(x, y)
    }

    fn grad_y_g(&self, x: &Mat, y: &Mat, batch: &Batch) -> Result<Mat> {
        batch.require_full(self.name())?;
        Ok(-self.f.grad_y(x, y)?)
    }

    fn hess_y_g(&self, x: &Mat, y: &Mat, batch: &Batch) -> Result<LinearMap<'_>> {
        batch.require_full(self.name())?;
        Ok(negate(self.f.hess_y(x, y)?))
    }

    fn cross_xy_g(&self, x: &Mat, y: &Mat, batch: &Batch) -> Result<LinearMap<'_>> {
        batch.require_full(self.name())?;
        Ok(negate(self.f.cross_xy(x, y)?))
    }

    fn hess_inv_y_g(&self, x: &Mat, y: &Mat, batch: &Batch) -> Option<Result<LinearMap<'_>>> {
        if let Err(e) = batch.require_full(self.name()) {
            return Some(Err(e));
        }
        self.f.hess_inv_y(x, y).map(|h| h.map(negate))
    }

    fn lower_solution(&self, x: &Mat) -> Option<Result<Mat>> {
        self.f.maximizer(x)
    }

    fn is_minmax(&self) -> bool {
        true
    }
}

/// `f(x, y) = xᵀb + xᵀy − ½‖y‖²` on `ℝᵈ × ℝᵈ`, with `y*(x) = x` and
/// `F(x) = xᵀb + ½‖x‖²`.
#[derive(Debug, Clone)]
pub struct BilinearSaddle {
    b: Mat,
    space: Euclidean,
}

impl BilinearSaddle {
    pub fn new(b: Mat) -> Result<Self> {
        if b.ncols() != 1 {
            return Err(Error::contract("b must be a column vector"));
        }
        let space = Euclidean::vector(b.nrows());
        Ok(Self { b, space })
    }

    /// `∇F(x) = b + x`.
    pub fn value_gradient(&self, x: &Mat) -> Mat {
        &self.b + x
    }
}

impl SaddleFunction for BilinearSaddle {
    fn upper(&self) -> &dyn Manifold {
        &self.space
    }

    fn lower(&self) -> &dyn Manifold {
        &self.space
    }

    fn value(&self, x: &Mat, y: &Mat) -> Result<f64> {
        Ok(x.dot(&self.b) + x.dot(y) - 0.5 * y.norm_squared())
    }

    fn grad_x(&self, _x: &Mat, y: &Mat) -> Result<Mat> {
        Ok(&self.b + y)
    }

    fn grad_y(&self, x: &Mat, y: &Mat) -> Result<Mat> {
        Ok(x - y)
    }

    fn hess_y(&self, _x: &Mat, y: &Mat) -> Result<LinearMap<'_>> {
        Ok(LinearMap::self_adjoint(y.clone(), |u| Ok(-u)))
    }

    fn cross_xy(&self, x: &Mat, y: &Mat) -> Result<LinearMap<'_>> {
        Ok(LinearMap::new(y.clone(), x.clone(), |v| Ok(v.clone()), |u| Ok(u.clone())))
    }

    fn hess_inv_y(&self, _x: &Mat, y: &Mat) -> Option<Result<LinearMap<'_>>> {
        Some(Ok(LinearMap::self_adjoint(y.clone(), |u| Ok(-u))))
    }

    fn maximizer(&self, x: &Mat) -> Option<Result<Mat>> {
        Some(Ok(x.clone()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lower_gradient_is_negated_upper_gradient() {
        let p = MinMax::new(BilinearSaddle::new(Mat::from_column_slice(2, 1, &[1.0, 0.0])).unwrap());
        let x = Mat::from_column_slice(2, 1, &[0.3, -0.2]);
        let y = Mat::from_column_slice(2, 1, &[1.5, 0.7]);
        let gf = p.grad_y_f(&x, &y, &Batch::Full).unwrap();
        let gg = p.grad_y_g(&x, &y, &Batch::Full).unwrap();
        assert_eq!(gg, -gf);
        let u = Mat::from_column_slice(2, 1, &[1.0, 2.0]);
        assert_eq!(p.hess_y_g(&x, &y, &Batch::Full).unwrap().apply(&u).unwrap(), u);
        let hinv = p.hess_inv_y_g(&x, &y, &Batch::Full).unwrap().unwrap();
        assert_eq!(hinv.apply(&u).unwrap(), u);
        assert!(p.is_minmax());
    }
}
