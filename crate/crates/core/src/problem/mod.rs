//! The bilevel problem contract and its concrete instances.
//!
//! Upper-level quantities (`f`) are averaged over upper samples and lower-level
//! quantities (`g`) over lower samples; a [`Batch`] selects which ones.

mod hyperrep;
mod minmax;
mod ot;
mod quadratic;
mod synthetic;

pub use hyperrep::{HyperRep, HyperRepData};
pub use minmax::{BilinearSaddle, MinMax, SaddleFunction};
pub use ot::{OtDomainAdaptation, TwoDomainData};
pub use quadratic::QuadraticOracle;
pub use synthetic::SyntheticStiefelSpd;

use rand::{Rng, RngCore};

use crate::error::{Error, Result};
use crate::geometry::{LinearMap, Manifold};
use crate::linalg::Mat;

/// Which samples a derivative is averaged over.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum Batch {
    /// Every sample, in order.
    #[default]
    Full,
    /// Sample indices, repetitions allowed.
    Indices(Vec<usize>),
}

impl Batch {
    /// Index list this batch stands for out of `n` samples.
    pub fn indices(&self, n: usize) -> Result<Vec<usize>> {
        match self {
            Batch::Full => Ok((0..n).collect()),
            Batch::Indices(idx) => {
                if n <= 1 {
                    return Err(Error::contract("mini-batch requested on a deterministic problem"));
                }
                if idx.is_empty() {
                    return Err(Error::contract("empty mini-batch"));
                }
                if let Some(bad) = idx.iter().find(|&&i| i >= n) {
                    return Err(Error::contract(format!("batch index {bad} out of range for {n} samples")));
                }
                Ok(idx.clone())
            }
        }
    }

    /// Rejects index batches for deterministic problems.
    pub fn require_full(&self, what: &str) -> Result<()> {
        match self {
            Batch::Full => Ok(()),
            Batch::Indices(_) => Err(Error::contract(format!(
                "mini-batch requested on deterministic problem {what}"
            ))),
        }
    }
}

/// Mini-batch sizes `B1..B4`: inner gradient, upper objective, cross term, Hessian.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BatchSizes {
    pub b1: usize,
    pub b2: usize,
    pub b3: usize,
    pub b4: usize,
}

/// Draws `size` indices uniformly with replacement out of `n`; sizes of at
/// least `n` select the whole set.
pub fn sample_batch(n: usize, size: usize, rng: &mut dyn RngCore) -> Batch {
    if size >= n {
        Batch::Full
    } else {
        Batch::Indices((0..size).map(|_| rng.random_range(0..n)).collect())
    }
}

/// One draw of the three estimator batches `B2`, `B3`, `B4`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EstimatorBatches {
    pub upper: Batch,
    pub cross: Batch,
    pub hess: Batch,
}

impl EstimatorBatches {
    pub fn full() -> Self {
        Self::default()
    }

    pub fn sample(p: &dyn BilevelProblem, sizes: &BatchSizes, rng: &mut dyn RngCore) -> Result<Self> {
        require_stochastic(p)?;
        Ok(Self {
            upper: sample_batch(p.n_upper_samples(), sizes.b2, rng),
            cross: sample_batch(p.n_lower_samples(), sizes.b3, rng),
            hess: sample_batch(p.n_lower_samples(), sizes.b4, rng),
        })
    }
}

/// Contract violation unless the problem has more than one sample somewhere.
pub fn require_stochastic(p: &dyn BilevelProblem) -> Result<()> {
    if !p.is_stochastic() {
        return Err(Error::contract(format!("problem {} is deterministic", p.name())));
    }
    Ok(())
}

/// `min_x f(x, y*(x))` subject to `y*(x) = argmin_y g(x, y)`.
///
/// Gradients are Riemannian gradients; second-order terms are returned as
/// [`LinearMap`]s. `cross_xy_g` maps `T_y → T_x` and its adjoint is the
/// `G²_yx g` operator `T_x → T_y`.
pub trait BilevelProblem: Send + Sync {
    fn name(&self) -> &str;

    fn upper(&self) -> &dyn Manifold;

    fn lower(&self) -> &dyn Manifold;

    fn n_upper_samples(&self) -> usize {
        1
    }

    fn n_lower_samples(&self) -> usize {
        1
    }

    fn is_stochastic(&self) -> bool {
        self.n_upper_samples() > 1 || self.n_lower_samples() > 1
    }

    fn upper_objective(&self, x: &Mat, y: &Mat, batch: &Batch) -> Result<f64>;

    fn lower_objective(&self, x: &Mat, y: &Mat, batch: &Batch) -> Result<f64>;

    fn grad_x_f(&self, x: &Mat, y: &Mat, batch: &Batch) -> Result<Mat>;

    fn grad_y_f(&self, x: &Mat, y: &Mat, batch: &Batch) -> Result<Mat>;

    fn grad_y_g(&self, x: &Mat, y: &Mat, batch: &Batch) -> Result<Mat>;

    fn hess_y_g(&self, x: &Mat, y: &Mat, batch: &Batch) -> Result<LinearMap<'_>>;

    fn cross_xy_g(&self, x: &Mat, y: &Mat, batch: &Batch) -> Result<LinearMap<'_>>;

    /// Inverse lower Hessian when the problem has one in closed form.
    fn hess_inv_y_g(&self, _x: &Mat, _y: &Mat, _batch: &Batch) -> Option<Result<LinearMap<'_>>> {
        None
    }

    /// Exact lower solution `y*(x)` when available in closed form.
    fn lower_solution(&self, _x: &Mat) -> Option<Result<Mat>> {
        None
    }

    /// Whether `g = −f`.
    fn is_minmax(&self) -> bool {
        false
    }
}
