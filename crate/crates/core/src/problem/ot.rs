use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

use super::{Batch, BilevelProblem};
use crate::error::{Error, Result};
use crate::geometry::{LinearMap, Manifold};
use crate::linalg::{dlogm, gaussian, spd_inverse, sym, Mat, SpdFactors, SymEig};
use crate::manifolds::{DoublyStochastic, Spd};

/// Labelled source samples and target samples for domain adaptation.
#[derive(Debug, Clone)]
pub struct TwoDomainData {
    pub source: Mat,
    pub target: Mat,
    pub source_labels: Vec<usize>,
    pub target_labels: Vec<usize>,
}

impl TwoDomainData {
    /// Gaussian class clouds in the source domain; the target domain applies a
    /// random near-identity linear map (`map_strength = 0` gives identical
    /// domains). Classes are assigned round-robin.
    pub fn generate(
        n: usize,
        m: usize,
        d: usize,
        classes: usize,
        map_strength: f64,
        rng: &mut dyn RngCore,
    ) -> Self {
        let centers = gaussian(classes.max(1), d, rng) * 4.0;
        let sample = |count: usize, rng: &mut dyn RngCore| {
            let mut pts = Mat::zeros(count, d);
            let mut labels = Vec::with_capacity(count);
            for i in 0..count {
                let c = i % classes.max(1);
                for k in 0..d {
                    let z: f64 = StandardNormal.sample(&mut *rng);
                    pts[(i, k)] = centers[(c, k)] + z;
                }
                labels.push(c);
            }
            (pts, labels)
        };
        let (source, source_labels) = sample(n, rng);
        if map_strength == 0.0 && n == m {
            return Self {
                target: source.clone(),
                target_labels: source_labels.clone(),
                source,
                source_labels,
            };
        }
        let (raw, target_labels) = sample(m, rng);
        let map = Mat::identity(d, d) + gaussian(d, d, rng) * (map_strength / (d as f64).sqrt());
        Self {
            target: raw * map.transpose(),
            source,
            source_labels,
            target_labels,
        }
    }
}

/// Metric-learning optimal transport over `Π(μ, ν) × SPD(d)`:
///
/// ```text
/// min_Γ ⟨Γ, C(X M*^{-1/2}, Y M*^{-1/2})⟩ + λ ⟨Γ, log Γ⟩
/// M* = argmin_M α d²(M, XᵀX) + (1 − α) d²(M, YᵀΓᵀΓY)
/// ```
///
/// The lower Hessian is a central difference of `grad_y_g` with parallel
/// transport back to the base point.
#[derive(Debug, Clone)]
pub struct OtDomainAdaptation {
    x: Mat,
    y: Mat,
    p: Mat,
    alpha: f64,
    lambda: f64,
    upper: DoublyStochastic,
    lower: Spd,
}

impl OtDomainAdaptation {
    pub fn new(x: Mat, y: Mat, alpha: f64, lambda: f64) -> Result<Self> {
        let upper = DoublyStochastic::uniform(x.nrows(), y.nrows())?;
        Self::with_upper(x, y, alpha, lambda, upper)
    }

    pub fn with_upper(x: Mat, y: Mat, alpha: f64, lambda: f64, upper: DoublyStochastic) -> Result<Self> {
        let (n, d) = x.shape();
        let m = y.nrows();
        if y.ncols() != d {
            return Err(Error::contract("source and target must share the feature dimension"));
        }
        if n < d || m < d {
            return Err(Error::contract(format!("need n, m >= d, got n={n}, m={m}, d={d}")));
        }
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::contract("alpha must lie in [0, 1]"));
        }
        if !(lambda >= 0.0) {
            return Err(Error::contract("entropy weight must be nonnegative"));
        }
        if upper.ambient_shape() != (n, m) {
            return Err(Error::contract("plan manifold shape does not match the data"));
        }
        let p = sym(&x.tr_mul(&x));
        if !(SymEig::new(&p).min_value() > 0.0) {
            return Err(Error::numeric("XᵀX is rank deficient"));
        }
        Ok(Self {
            x,
            y,
            p,
            alpha,
            lambda,
            upper,
            lower: Spd::new(d),
        })
    }

    pub fn plans(&self) -> &DoublyStochastic {
        &self.upper
    }

    pub fn source_gram(&self) -> &Mat {
        &self.p
    }

    /// `YᵀΓᵀΓY`.
    pub fn target_gram(&self, gamma: &Mat) -> Mat {
        let gy = gamma * &self.y;
        sym(&gy.tr_mul(&gy))
    }

    /// Pairwise squared Mahalanobis distances `(x_i − y_j)ᵀ M⁻¹ (x_i − y_j)`.
    pub fn cost(&self, m: &Mat) -> Result<Mat> {
        let mi = spd_inverse(m)?;
        let xm = &self.x * &mi;
        let ym = &self.y * &mi;
        let xx: Vec<f64> = (0..self.x.nrows()).map(|i| xm.row(i).dot(&self.x.row(i))).collect();
        let yy: Vec<f64> = (0..self.y.nrows()).map(|j| ym.row(j).dot(&self.y.row(j))).collect();
        let cross = xm * self.y.transpose();
        Ok(Mat::from_fn(self.x.nrows(), self.y.nrows(), |i, j| {
            xx[i] + yy[j] - 2.0 * cross[(i, j)]
        }))
    }

    /// `Σ_ij Γ_ij (x_i − y_j)(x_i − y_j)ᵀ`.
    fn scatter(&self, gamma: &Mat) -> Mat {
        let rows = gamma.column_sum();
        let cols = gamma.row_sum().transpose();
        let xr = Mat::from_fn(self.x.nrows(), self.x.ncols(), |i, k| self.x[(i, k)] * rows[i]);
        let yc = Mat::from_fn(self.y.nrows(), self.y.ncols(), |j, k| self.y[(j, k)] * cols[j]);
        let xgy = self.x.tr_mul(&(gamma * &self.y));
        sym(&(self.x.tr_mul(&xr) + self.y.tr_mul(&yc) - &xgy - xgy.transpose()))
    }

    fn gradient(&self, gamma: &Mat, m: &Mat) -> Result<Mat> {
        let mut g = self.lower.log(m, &self.p)? * (-2.0 * self.alpha);
        if self.alpha < 1.0 {
            g -= self.lower.log(m, &self.target_gram(gamma))? * (2.0 * (1.0 - self.alpha));
        }
        Ok(g)
    }

    fn entropy_gradient(&self, gamma: &Mat) -> Mat {
        gamma.map(|v| v.ln() + 1.0) * self.lambda
    }
}

impl BilevelProblem for OtDomainAdaptation {
    fn name(&self) -> &str {
        "ot"
    }

    fn upper(&self) -> &dyn Manifold {
        &self.upper
    }

    fn lower(&self) -> &dyn Manifold {
        &self.lower
    }

    fn upper_objective(&self, gamma: &Mat, m: &Mat, batch: &Batch) -> Result<f64> {
        batch.require_full(self.name())?;
        let transport = spd_inverse(m)?.dot(&self.scatter(gamma));
        let ent: f64 = gamma.iter().map(|v| v * v.ln()).sum();
        Ok(transport + self.lambda * ent)
    }

    fn lower_objective(&self, gamma: &Mat, m: &Mat, batch: &Batch) -> Result<f64> {
        batch.require_full(self.name())?;
        let mut v = self.alpha * self.lower.dist(m, &self.p)?.powi(2);
        if self.alpha < 1.0 {
            v += (1.0 - self.alpha) * self.lower.dist(m, &self.target_gram(gamma))?.powi(2);
        }
        Ok(v)
    }

    fn grad_x_f(&self, gamma: &Mat, m: &Mat, batch: &Batch) -> Result<Mat> {
        batch.require_full(self.name())?;
        let eg = self.cost(m)? + self.entropy_gradient(gamma);
        Ok(self.upper.egrad_to_rgrad(gamma, &eg))
    }

    fn grad_y_f(&self, gamma: &Mat, _m: &Mat, batch: &Batch) -> Result<Mat> {
        batch.require_full(self.name())?;
        Ok(-self.scatter(gamma))
    }

    fn grad_y_g(&self, gamma: &Mat, m: &Mat, batch: &Batch) -> Result<Mat> {
        batch.require_full(self.name())?;
        self.gradient(gamma, m)
    }

    fn hess_y_g(&self, gamma: &Mat, m: &Mat, batch: &Batch) -> Result<LinearMap<'_>> {
        batch.require_full(self.name())?;
        let gamma = gamma.clone();
        let base = m.clone();
        let h = 1e-6 * (1.0 + m.norm());
        Ok(LinearMap::self_adjoint(m.clone(), move |u| {
            let un = self.lower.norm(&base, u);
            if un == 0.0 {
                return Ok(Mat::zeros(u.nrows(), u.ncols()));
            }
            let dir = u / un;
            let plus = self.lower.exp(&base, &(&dir * h))?;
            let minus = self.lower.exp(&base, &(&dir * -h))?;
            let gp = self.lower.transport(&plus, &base, &self.gradient(&gamma, &plus)?)?;
            let gm = self.lower.transport(&minus, &base, &self.gradient(&gamma, &minus)?)?;
            Ok(sym(&((gp - gm) * (un / (2.0 * h)))))
        }))
    }

    fn cross_xy_g(&self, gamma: &Mat, m: &Mat, batch: &Batch) -> Result<LinearMap<'_>> {
        batch.require_full(self.name())?;
        if self.alpha >= 1.0 {
            let shape = gamma.shape();
            let d = m.nrows();
            return Ok(LinearMap::new(
                m.clone(),
                gamma.clone(),
                move |_| Ok(Mat::zeros(shape.0, shape.1)),
                move |_| Ok(Mat::zeros(d, d)),
            ));
        }
        let f = std::rc::Rc::new(SpdFactors::new(m)?);
        let z = std::rc::Rc::new(SymEig::new(&f.whiten(&self.target_gram(gamma))));
        let weight = 2.0 * (1.0 - self.alpha);
        let (g1, g2) = (gamma.clone(), gamma.clone());
        let (f1, z1) = (f.clone(), z.clone());
        Ok(LinearMap::new(
            m.clone(),
            gamma.clone(),
            move |v| {
                let r = &f1.inv_sqrt * dlogm(&z1, &f1.whiten(v)) * &f1.inv_sqrt;
                let eg = &g1 * &self.y * r * self.y.transpose() * (-2.0 * weight);
                Ok(self.upper.egrad_to_rgrad(&g1, &eg))
            },
            move |xi| {
                let gy = &g2 * &self.y;
                let qdot = sym(&(self.y.tr_mul(&(xi.transpose() * gy)))) * 2.0;
                Ok(f.color(&dlogm(&z, &f.whiten(&qdot))) * -weight)
            },
        ))
    }

    fn lower_solution(&self, gamma: &Mat) -> Option<Result<Mat>> {
        if self.alpha >= 1.0 {
            return Some(Ok(self.p.clone()));
        }
        Some(self.lower.geodesic(&self.p, &self.target_gram(gamma), 1.0 - self.alpha))
    }
}
