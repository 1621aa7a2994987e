use nalgebra::Cholesky;
use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

use super::{Batch, BilevelProblem};
use crate::error::{Error, Result};
use crate::geometry::{LinearMap, Manifold};
use crate::linalg::{dlogm, gaussian, sym, unvec_sym, vec_sym, Mat, SymEig, Vector};
use crate::manifolds::{Euclidean, Stiefel};

/// SPD samples with scalar targets split into training and validation sets.
#[derive(Debug, Clone)]
pub struct HyperRepData {
    pub inputs: Vec<Mat>,
    pub targets: Vec<f64>,
    pub train: Vec<usize>,
    pub val: Vec<usize>,
}

impl HyperRepData {
    /// Random SPD inputs `ZZᵀ/d + 0.1 I` with targets from a seeded ground truth
    /// `(W, β)` plus unit Gaussian noise.
    pub fn generate(n_train: usize, n_val: usize, d: usize, r: usize, rng: &mut dyn RngCore) -> Result<Self> {
        let st = Stiefel::new(d, r)?;
        let w_true = st.rand_point(rng);
        let p = r * (r + 1) / 2;
        let beta_true = gaussian(p, 1, rng).column(0).into_owned();
        let n = n_train + n_val;
        let mut inputs = Vec::with_capacity(n);
        let mut targets = Vec::with_capacity(n);
        for _ in 0..n {
            let z = gaussian(d, d, rng);
            let a = sym(&(&z * z.transpose() / d as f64)) + Mat::identity(d, d) * 0.1;
            let phi = feature(&a, &w_true)?.1;
            let noise: f64 = StandardNormal.sample(rng);
            targets.push(phi.dot(&beta_true) + noise);
            inputs.push(a);
        }
        Ok(Self {
            inputs,
            targets,
            train: (0..n_train).collect(),
            val: (n_train..n).collect(),
        })
    }
}

/// `φ(W) = vec(logm(WᵀAW))` together with the eigendecomposition of `WᵀAW`.
fn feature(a: &Mat, w: &Mat) -> Result<(SymEig, Vector)> {
    let s = sym(&(w.transpose() * a * w));
    let eig = SymEig::new(&s);
    if !(eig.min_value() > 0.0) {
        return Err(Error::numeric(format!(
            "WᵀAW is not positive definite (min eigenvalue {:.3e})",
            eig.min_value()
        )));
    }
    let logm = eig.map(f64::ln);
    Ok((eig, vec_sym(&logm)))
}

/// Shallow hyper-representation: the upper level learns an embedding
/// `W ∈ St(d, r)` of SPD inputs, the lower level fits ridge regression
/// coefficients `β` on the features `vec(logm(WᵀA_iW))`.
#[derive(Debug, Clone)]
pub struct HyperRep {
    data: HyperRepData,
    lambda: f64,
    upper: Stiefel,
    lower: Euclidean,
}

struct Evaluated {
    sample: usize,
    eig: SymEig,
    phi: Vector,
}

impl HyperRep {
    pub fn new(data: HyperRepData, r: usize, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(Error::contract("ridge parameter must be positive"));
        }
        if data.train.is_empty() || data.val.is_empty() {
            return Err(Error::contract("training and validation sets must be nonempty"));
        }
        if data.inputs.len() != data.targets.len() {
            return Err(Error::contract("one target per input required"));
        }
        let d = data.inputs[0].nrows();
        for a in &data.inputs {
            if a.shape() != (d, d) || !(SymEig::new(&sym(a)).min_value() > 0.0) {
                return Err(Error::contract("inputs must be SPD matrices of equal size"));
            }
        }
        Ok(Self {
            data,
            lambda,
            upper: Stiefel::new(d, r)?,
            lower: Euclidean::vector(r * (r + 1) / 2),
        })
    }

    pub fn data(&self) -> &HyperRepData {
        &self.data
    }

    fn r(&self) -> usize {
        self.upper.ambient_shape().1
    }

    fn evaluate(&self, w: &Mat, set: &[usize], batch: &Batch) -> Result<Vec<Evaluated>> {
        batch
            .indices(set.len())?
            .into_iter()
            .map(|k| {
                let sample = set[k];
                let (eig, phi) = feature(&self.data.inputs[sample], w)?;
                Ok(Evaluated { sample, eig, phi })
            })
            .collect()
    }

    fn residual(&self, e: &Evaluated, beta: &Mat) -> f64 {
        e.phi.dot(&beta.column(0)) - self.data.targets[e.sample]
    }

    /// `2 A W dlogm(WᵀAW)[Z]`: the Euclidean gradient in `W` of `⟨logm(WᵀAW), Z⟩`.
    fn pullback(&self, e: &Evaluated, w: &Mat, z: &Mat) -> Mat {
        &self.data.inputs[e.sample] * w * dlogm(&e.eig, z) * 2.0
    }

    /// `vec(dlogm(WᵀAW)[ξᵀAW + WᵀAξ])`.
    fn feature_derivative(&self, e: &Evaluated, w: &Mat, xi: &Mat) -> Vector {
        let a = &self.data.inputs[e.sample];
        let sdot = sym(&(xi.transpose() * a * w)) * 2.0;
        vec_sym(&dlogm(&e.eig, &sdot))
    }

    fn hessian_matrix(&self, evals: &[Evaluated]) -> Mat {
        let p = self.lower.dim();
        let mut h = Mat::identity(p, p) * self.lambda;
        let scale = 1.0 / evals.len() as f64;
        for e in evals {
            h += &e.phi * e.phi.transpose() * scale;
        }
        h
    }
}

impl BilevelProblem for HyperRep {
    fn name(&self) -> &str {
        "hyperrep"
    }

    fn upper(&self) -> &dyn Manifold {
        &self.upper
    }

    fn lower(&self) -> &dyn Manifold {
        &self.lower
    }

    fn n_upper_samples(&self) -> usize {
        self.data.val.len()
    }

    fn n_lower_samples(&self) -> usize {
        self.data.train.len()
    }

    fn upper_objective(&self, w: &Mat, beta: &Mat, batch: &Batch) -> Result<f64> {
        let evals = self.evaluate(w, &self.data.val, batch)?;
        let total: f64 = evals.iter().map(|e| 0.5 * self.residual(e, beta).powi(2)).sum();
        Ok(total / evals.len() as f64)
    }

    fn lower_objective(&self, w: &Mat, beta: &Mat, batch: &Batch) -> Result<f64> {
        let evals = self.evaluate(w, &self.data.train, batch)?;
        let total: f64 = evals.iter().map(|e| 0.5 * self.residual(e, beta).powi(2)).sum();
        Ok(total / evals.len() as f64 + 0.5 * self.lambda * beta.norm_squared())
    }

    fn grad_x_f(&self, w: &Mat, beta: &Mat, batch: &Batch) -> Result<Mat> {
        let evals = self.evaluate(w, &self.data.val, batch)?;
        let b = unvec_sym(&beta.column(0).into_owned(), self.r());
        let mut eg = Mat::zeros(w.nrows(), w.ncols());
        for e in &evals {
            eg += self.pullback(e, w, &b) * self.residual(e, beta);
        }
        Ok(self.upper.egrad_to_rgrad(w, &(eg / evals.len() as f64)))
    }

    fn grad_y_f(&self, w: &Mat, beta: &Mat, batch: &Batch) -> Result<Mat> {
        let evals = self.evaluate(w, &self.data.val, batch)?;
        let mut g = Vector::zeros(self.lower.dim());
        for e in &evals {
            g += &e.phi * self.residual(e, beta);
        }
        Ok(Mat::from_column_slice(g.len(), 1, (g / evals.len() as f64).as_slice()))
    }

    fn grad_y_g(&self, w: &Mat, beta: &Mat, batch: &Batch) -> Result<Mat> {
        let evals = self.evaluate(w, &self.data.train, batch)?;
        let mut g = Vector::zeros(self.lower.dim());
        for e in &evals {
            g += &e.phi * self.residual(e, beta);
        }
        let g = g / evals.len() as f64;
        Ok(Mat::from_column_slice(g.len(), 1, g.as_slice()) + beta * self.lambda)
    }

    fn hess_y_g(&self, w: &Mat, beta: &Mat, batch: &Batch) -> Result<LinearMap<'_>> {
        let evals = self.evaluate(w, &self.data.train, batch)?;
        let h = self.hessian_matrix(&evals);
        Ok(LinearMap::self_adjoint(beta.clone(), move |v| Ok(&h * v)))
    }

    fn cross_xy_g(&self, w: &Mat, beta: &Mat, batch: &Batch) -> Result<LinearMap<'_>> {
        let evals = std::rc::Rc::new(self.evaluate(w, &self.data.train, batch)?);
        let residuals: std::rc::Rc<Vec<f64>> = std::rc::Rc::new(evals.iter().map(|e| self.residual(e, beta)).collect());
        let scale = 1.0 / evals.len() as f64;
        let r = self.r();
        let (w1, w2) = (w.clone(), w.clone());
        let (b1, b2) = (beta.column(0).into_owned(), beta.column(0).into_owned());
        let (ev1, ev2) = (evals.clone(), evals);
        let (res1, res2) = (residuals.clone(), residuals);
        Ok(LinearMap::new(
            beta.clone(),
            w.clone(),
            move |v| {
                let v = v.column(0).into_owned();
                let mut eg = Mat::zeros(w1.nrows(), w1.ncols());
                for (e, ri) in ev1.iter().zip(res1.iter()) {
                    let z = &v * *ri + &b1 * e.phi.dot(&v);
                    eg += self.pullback(e, &w1, &unvec_sym(&z, r));
                }
                Ok(self.upper.proj(&w1, &(eg * scale)))
            },
            move |xi| {
                let mut out = Vector::zeros(b2.len());
                for (e, ri) in ev2.iter().zip(res2.iter()) {
                    let dphi = self.feature_derivative(e, &w2, xi);
                    out += &dphi * *ri + &e.phi * dphi.dot(&b2);
                }
                Ok(Mat::from_column_slice(out.len(), 1, (out * scale).as_slice()))
            },
        ))
    }

    fn hess_inv_y_g(&self, w: &Mat, beta: &Mat, batch: &Batch) -> Option<Result<LinearMap<'_>>> {
        let build = || -> Result<LinearMap<'_>> {
            let evals = self.evaluate(w, &self.data.train, batch)?;
            let chol = Cholesky::new(self.hessian_matrix(&evals))
                .ok_or_else(|| Error::numeric("ridge Hessian is not positive definite"))?;
            Ok(LinearMap::self_adjoint(beta.clone(), move |v| Ok(chol.solve(v))))
        };
        Some(build())
    }

    fn lower_solution(&self, w: &Mat) -> Option<Result<Mat>> {
        let solve = || -> Result<Mat> {
            let evals = self.evaluate(w, &self.data.train, &Batch::Full)?;
            let mut rhs = Vector::zeros(self.lower.dim());
            for e in &evals {
                rhs += &e.phi * self.data.targets[e.sample];
            }
            let rhs = rhs / evals.len() as f64;
            let chol = Cholesky::new(self.hessian_matrix(&evals))
                .ok_or_else(|| Error::numeric("ridge Hessian is not positive definite"))?;
            let beta = chol.solve(&rhs);
            Ok(Mat::from_column_slice(beta.len(), 1, beta.as_slice()))
        };
        Some(solve())
    }
}
