//! The Riemannian manifold contract consumed by problems, estimators and solvers.
//!
//! Solvers work on raw coordinate matrices through [`Manifold`]. The
//! [`ManifoldPoint`] / [`TangentVec`] wrappers and [`ManifoldExt`] add the
//! base-point bookkeeping for callers that want it checked.

mod linear_map;
mod product;

pub use linear_map::LinearMap;
pub use product::ProductManifold;

use std::fmt::Debug;

use rand::RngCore;

use crate::error::{Error, Result};
use crate::linalg::Mat;

/// Membership / tangency tolerance.
pub const TOL_MEM: f64 = 1e-10;

/// A Riemannian manifold of real matrices.
///
/// Every method is a pure function of its arguments. Tangent vectors are
/// ambient matrices of [`Manifold::ambient_shape`].
pub trait Manifold: Debug + Send + Sync {
    /// Identifier of this manifold instance, e.g. `spd(3)`.
    fn id(&self) -> String;

    /// Intrinsic dimension.
    fn dim(&self) -> usize;

    fn ambient_shape(&self) -> (usize, usize);

    /// `Ok` when `x` lies on the manifold within [`TOL_MEM`].
    fn check_point(&self, x: &Mat) -> Result<()>;

    /// `Ok` when `u` lies in the tangent space at `x` within [`TOL_MEM`].
    fn check_tangent(&self, x: &Mat, u: &Mat) -> Result<()>;

    fn inner(&self, x: &Mat, u: &Mat, v: &Mat) -> f64;

    fn norm(&self, x: &Mat, u: &Mat) -> f64 {
        self.inner(x, u, u).max(0.0).sqrt()
    }

    /// Whether [`Manifold::exp`] is implemented.
    fn has_exp(&self) -> bool {
        true
    }

    fn exp(&self, x: &Mat, u: &Mat) -> Result<Mat>;

    /// Inverse of `exp` inside a totally normal neighbourhood. Not checked:
    /// far-apart points may give inaccurate answers.
    fn log(&self, x: &Mat, y: &Mat) -> Result<Mat>;

    fn dist(&self, x: &Mat, y: &Mat) -> Result<f64> {
        let u = self.log(x, y)?;
        Ok(self.norm(x, &u))
    }

    fn retract(&self, x: &Mat, u: &Mat) -> Result<Mat>;

    /// Isometric parallel transport from `from` to `to`.
    fn transport(&self, from: &Mat, to: &Mat, u: &Mat) -> Result<Mat>;

    /// Whether [`Manifold::transport`] is an isometry.
    fn transport_is_isometric(&self) -> bool {
        true
    }

    /// Orthogonal projection of an ambient matrix onto `T_x`.
    fn proj(&self, x: &Mat, a: &Mat) -> Mat;

    /// Metric adjoint of `u ↦ proj(to, u)` viewed as a map `T_from → T_to`.
    fn proj_adjoint(&self, from: &Mat, to: &Mat, v: &Mat) -> Mat;

    /// Riemannian gradient from the Euclidean gradient.
    fn egrad_to_rgrad(&self, x: &Mat, eg: &Mat) -> Mat;

    /// Riemannian Hessian-vector product from Euclidean derivative data.
    fn ehess_to_rhess(&self, x: &Mat, eg: &Mat, ehess_u: &Mat, u: &Mat) -> Result<Mat>;

    fn rand_point(&self, rng: &mut dyn RngCore) -> Mat;

    /// Random unit-norm tangent vector at `x`.
    fn rand_tangent(&self, x: &Mat, rng: &mut dyn RngCore) -> Mat;

    /// One re-normalization pass pulling a slightly drifted point back onto
    /// the manifold.
    fn normalize(&self, x: &Mat) -> Result<Mat>;

    fn zero_tangent(&self, _x: &Mat) -> Mat {
        let (r, c) = self.ambient_shape();
        Mat::zeros(r, c)
    }

    /// Exponential map when available, retraction otherwise.
    fn exp_or_retract(&self, x: &Mat, u: &Mat) -> Result<Mat> {
        if self.has_exp() {
            self.exp(x, u)
        } else {
            self.retract(x, u)
        }
    }

    /// Parallel transport when available, tangent projection otherwise.
    fn vector_transport(&self, from: &Mat, to: &Mat, u: &Mat) -> Result<Mat> {
        match self.transport(from, to, u) {
            Err(Error::Unsupported(_)) => Ok(self.proj(to, u)),
            other => other,
        }
    }
}

/// How a tangent step is mapped back onto the manifold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MapMode {
    /// Exponential map where available, retraction otherwise.
    #[default]
    Exponential,
    Retraction,
}

impl MapMode {
    /// Moves from `x` along `u`, then applies one re-normalization pass.
    pub fn step(self, m: &dyn Manifold, x: &Mat, u: &Mat) -> Result<Mat> {
        let y = match self {
            MapMode::Exponential => m.exp_or_retract(x, u)?,
            MapMode::Retraction => m.retract(x, u)?,
        };
        m.normalize(&y)
    }
}

/// Orthonormal basis of `T_x` built by Gram-Schmidt on projected coordinate
/// matrices. Intended for finite-difference oracles at small sizes.
pub fn tangent_basis(m: &dyn Manifold, x: &Mat) -> Vec<Mat> {
    let (rows, cols) = m.ambient_shape();
    let dim = m.dim();
    let mut basis: Vec<Mat> = Vec::with_capacity(dim);
    'outer: for j in 0..cols {
        for i in 0..rows {
            let mut e = Mat::zeros(rows, cols);
            e[(i, j)] = 1.0;
            let mut v = m.proj(x, &e);
            // two passes of modified Gram-Schmidt
            for _ in 0..2 {
                for b in &basis {
                    let c = m.inner(x, b, &v);
                    v -= b * c;
                }
            }
            let n = m.norm(x, &v);
            if n > 1e-6 {
                basis.push(v / n);
                if basis.len() == dim {
                    break 'outer;
                }
            }
        }
    }
    basis
}

/// Point tagged with the manifold that owns it.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifoldPoint {
    pub coords: Mat,
    pub manifold_id: String,
}

/// Tangent vector tagged with its base point.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVec {
    pub coords: Mat,
    pub base: ManifoldPoint,
}

/// Base-point-checked wrappers over [`Manifold`].
pub trait ManifoldExt: Manifold {
    fn point(&self, coords: Mat) -> Result<ManifoldPoint> {
        self.check_point(&coords)?;
        Ok(ManifoldPoint {
            coords,
            manifold_id: self.id(),
        })
    }

    fn tangent(&self, base: &ManifoldPoint, coords: Mat) -> Result<TangentVec> {
        self.owns(base)?;
        self.check_tangent(&base.coords, &coords)?;
        Ok(TangentVec {
            coords,
            base: base.clone(),
        })
    }

    fn owns(&self, x: &ManifoldPoint) -> Result<()> {
        if x.manifold_id != self.id() {
            return Err(Error::contract(format!(
                "point belongs to {}, not {}",
                x.manifold_id,
                self.id()
            )));
        }
        Ok(())
    }

    fn based_at(&self, x: &ManifoldPoint, u: &TangentVec) -> Result<()> {
        self.owns(x)?;
        if u.base != *x {
            return Err(Error::contract("tangent vector is based at a different point"));
        }
        Ok(())
    }

    fn inner_at(&self, x: &ManifoldPoint, u: &TangentVec, v: &TangentVec) -> Result<f64> {
        self.based_at(x, u)?;
        self.based_at(x, v)?;
        Ok(self.inner(&x.coords, &u.coords, &v.coords))
    }

    fn norm_at(&self, x: &ManifoldPoint, u: &TangentVec) -> Result<f64> {
        self.based_at(x, u)?;
        Ok(self.norm(&x.coords, &u.coords))
    }

    fn exp_at(&self, x: &ManifoldPoint, u: &TangentVec) -> Result<ManifoldPoint> {
        self.based_at(x, u)?;
        let y = self.exp(&x.coords, &u.coords)?;
        Ok(ManifoldPoint {
            coords: y,
            manifold_id: self.id(),
        })
    }

    fn log_at(&self, x: &ManifoldPoint, y: &ManifoldPoint) -> Result<TangentVec> {
        self.owns(x)?;
        self.owns(y)?;
        Ok(TangentVec {
            coords: self.log(&x.coords, &y.coords)?,
            base: x.clone(),
        })
    }

    fn dist_at(&self, x: &ManifoldPoint, y: &ManifoldPoint) -> Result<f64> {
        self.owns(x)?;
        self.owns(y)?;
        self.dist(&x.coords, &y.coords)
    }

    fn retract_at(&self, x: &ManifoldPoint, u: &TangentVec) -> Result<ManifoldPoint> {
        self.based_at(x, u)?;
        Ok(ManifoldPoint {
            coords: self.retract(&x.coords, &u.coords)?,
            manifold_id: self.id(),
        })
    }

    fn transport_at(&self, from: &ManifoldPoint, to: &ManifoldPoint, u: &TangentVec) -> Result<TangentVec> {
        self.based_at(from, u)?;
        self.owns(to)?;
        Ok(TangentVec {
            coords: self.transport(&from.coords, &to.coords, &u.coords)?,
            base: to.clone(),
        })
    }

    fn proj_at(&self, x: &ManifoldPoint, a: &Mat) -> Result<TangentVec> {
        self.owns(x)?;
        if a.shape() != self.ambient_shape() {
            return Err(Error::contract(format!(
                "ambient matrix has shape {:?}, expected {:?}",
                a.shape(),
                self.ambient_shape()
            )));
        }
        Ok(TangentVec {
            coords: self.proj(&x.coords, a),
            base: x.clone(),
        })
    }

    fn egrad_to_rgrad_at(&self, x: &ManifoldPoint, eg: &Mat) -> Result<TangentVec> {
        self.owns(x)?;
        Ok(TangentVec {
            coords: self.egrad_to_rgrad(&x.coords, eg),
            base: x.clone(),
        })
    }

    fn rand_point_at(&self, rng: &mut dyn RngCore) -> ManifoldPoint {
        ManifoldPoint {
            coords: self.rand_point(rng),
            manifold_id: self.id(),
        }
    }

    fn rand_tangent_at(&self, x: &ManifoldPoint, rng: &mut dyn RngCore) -> TangentVec {
        TangentVec {
            coords: self.rand_tangent(&x.coords, rng),
            base: x.clone(),
        }
    }
}

impl<M: Manifold + ?Sized> ManifoldExt for M {}
