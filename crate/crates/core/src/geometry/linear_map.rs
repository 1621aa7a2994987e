use std::fmt;

use crate::error::Result;
use crate::linalg::Mat;

type Action<'a> = Box<dyn Fn(&Mat) -> Result<Mat> + 'a>;
type SharedAction<'a> = std::rc::Rc<dyn Fn(&Mat) -> Result<Mat> + 'a>;

/// A linear operator between two tangent spaces together with its metric adjoint.
pub struct LinearMap<'a> {
    domain_base: Mat,
    codomain_base: Mat,
    apply: Action<'a>,
    adjoint: Action<'a>,
}

impl<'a> LinearMap<'a> {
    pub fn new(
        domain_base: Mat,
        codomain_base: Mat,
        apply: impl Fn(&Mat) -> Result<Mat> + 'a,
        adjoint: impl Fn(&Mat) -> Result<Mat> + 'a,
    ) -> Self {
        Self {
            domain_base,
            codomain_base,
            apply: Box::new(apply),
            adjoint: Box::new(adjoint),
        }
    }

    /// Operator on a single tangent space that equals its own adjoint.
    pub fn self_adjoint(base: Mat, apply: impl Fn(&Mat) -> Result<Mat> + 'a) -> Self {
        let apply: SharedAction<'a> = std::rc::Rc::new(apply);
        let adj = apply.clone();
        Self {
            domain_base: base.clone(),
            codomain_base: base,
            apply: Box::new(move |u| apply(u)),
            adjoint: Box::new(move |u| adj(u)),
        }
    }

    /// Identity on the tangent space at `base`.
    pub fn identity(base: Mat) -> Self {
        Self::self_adjoint(base, |u| Ok(u.clone()))
    }

    pub fn apply(&self, u: &Mat) -> Result<Mat> {
        (self.apply)(u)
    }

    pub fn adjoint_apply(&self, v: &Mat) -> Result<Mat> {
        (self.adjoint)(v)
    }

    pub fn domain_base(&self) -> &Mat {
        &self.domain_base
    }

    pub fn codomain_base(&self) -> &Mat {
        &self.codomain_base
    }

    /// The adjoint as an operator in its own right.
    pub fn transposed(self) -> LinearMap<'a> {
        LinearMap {
            domain_base: self.codomain_base,
            codomain_base: self.domain_base,
            apply: self.adjoint,
            adjoint: self.apply,
        }
    }
}

impl fmt::Debug for LinearMap<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LinearMap")
            .field("domain_shape", &self.domain_base.shape())
            .field("codomain_shape", &self.codomain_base.shape())
            .finish_non_exhaustive()
    }
}
