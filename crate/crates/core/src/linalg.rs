//! Dense kernels shared by the matrix manifolds: symmetric matrix functions,
//! the Lyapunov solver, Sinkhorn balancing and the sign-fixed QR factor.
//! Matrix functions go through a symmetric eigendecomposition.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Tolerance used to accept a matrix as symmetric (scaled by `1 + ‖A‖_F`).
pub const SYM_TOL: f64 = 1e-10;

pub fn sym(a: &Mat) -> Mat {
    (a + a.transpose()) * 0.5
}

pub fn asymmetry(a: &Mat) -> f64 {
    (a - a.transpose()).norm()
}

pub fn is_symmetric(a: &Mat, tol: f64) -> bool {
    a.is_square() && asymmetry(a) <= tol * (1.0 + a.norm())
}

fn require_symmetric(a: &Mat, what: &str) -> Result<()> {
    if !a.is_square() {
        return Err(Error::contract(format!(
            "{what}: expected a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if !is_symmetric(a, SYM_TOL) {
        return Err(Error::contract(format!(
            "{what}: matrix is not symmetric (asymmetry {:.3e})",
            asymmetry(a)
        )));
    }
    Ok(())
}

/// Eigendecomposition `A = Q diag(λ) Qᵀ` of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymEig {
    pub values: Vector,
    pub vectors: Mat,
}

impl SymEig {
    pub fn new(a: &Mat) -> Self {
        let e = SymmetricEigen::new(sym(a));
        SymEig {
            values: e.eigenvalues,
            vectors: e.eigenvectors,
        }
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `Q diag(f(λ)) Qᵀ`, symmetrized on output.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Mat {
        let q = &self.vectors;
        let mut scaled = q.clone();
        for (j, &l) in self.values.iter().enumerate() {
            let fl = f(l);
            scaled.column_mut(j).scale_mut(fl);
        }
        sym(&(scaled * q.transpose()))
    }

    /// `Qᵀ E Q`
    pub fn to_eigbasis(&self, e: &Mat) -> Mat {
        self.vectors.transpose() * e * &self.vectors
    }

    /// `Q E Qᵀ`
    pub fn from_eigbasis(&self, e: &Mat) -> Mat {
        &self.vectors * e * self.vectors.transpose()
    }
}

fn require_pd(eig: &SymEig, what: &str) -> Result<()> {
    let min = eig.min_value();
    if !(min > 0.0) || !min.is_finite() {
        return Err(Error::numeric(format!(
            "{what}: matrix is not positive definite (min eigenvalue {min:.3e})"
        )));
    }
    Ok(())
}

/// Principal exponential of a symmetric matrix.
pub fn expm_sym(s: &Mat) -> Result<Mat> {
    require_symmetric(s, "expm_sym")?;
    let eig = SymEig::new(s);
    if eig.max_value() > 700.0 {
        return Err(Error::numeric(format!(
            "expm_sym: eigenvalue {:.3e} overflows",
            eig.max_value()
        )));
    }
    Ok(eig.map(f64::exp))
}

/// Principal logarithm of an SPD matrix.
pub fn logm_spd(x: &Mat) -> Result<Mat> {
    require_symmetric(x, "logm_spd")?;
    let eig = SymEig::new(x);
    require_pd(&eig, "logm_spd")?;
    Ok(eig.map(f64::ln))
}

/// Principal square root of an SPD matrix.
pub fn sqrtm_spd(x: &Mat) -> Result<Mat> {
    spd_power(x, 0.5)
}

/// `X^p` for SPD `X`.
pub fn spd_power(x: &Mat, p: f64) -> Result<Mat> {
    require_symmetric(x, "spd_power")?;
    let eig = SymEig::new(x);
    require_pd(&eig, "spd_power")?;
    Ok(eig.map(|l| l.powf(p)))
}

/// Inverse of an SPD matrix through its Cholesky factor.
pub fn spd_inverse(x: &Mat) -> Result<Mat> {
    let chol = nalgebra::Cholesky::new(sym(x)).ok_or_else(|| {
        Error::numeric(format!(
            "spd_inverse: Cholesky failed (min eigenvalue {:.3e})",
            SymEig::new(x).min_value()
        ))
    })?;
    Ok(sym(&chol.inverse()))
}

/// Solves `A z = b` for SPD `A`.
pub fn spd_solve(a: &Mat, b: &Mat) -> Result<Mat> {
    let chol = nalgebra::Cholesky::new(sym(a))
        .ok_or_else(|| Error::numeric("spd_solve: Cholesky failed, matrix not PD"))?;
    Ok(chol.solve(b))
}

/// The square root, inverse square root and eigendecomposition of an SPD point.
#[derive(Debug, Clone)]
pub struct SpdFactors {
    pub eig: SymEig,
    pub sqrt: Mat,
    pub inv_sqrt: Mat,
}

impl SpdFactors {
    pub fn new(x: &Mat) -> Result<Self> {
        let eig = SymEig::new(x);
        require_pd(&eig, "spd factors")?;
        let sqrt = eig.map(f64::sqrt);
        let inv_sqrt = eig.map(|l| 1.0 / l.sqrt());
        Ok(SpdFactors { eig, sqrt, inv_sqrt })
    }

    pub fn inverse(&self) -> Mat {
        self.eig.map(|l| 1.0 / l)
    }

    /// `X^{-1/2} A X^{-1/2}`
    pub fn whiten(&self, a: &Mat) -> Mat {
        sym(&(&self.inv_sqrt * a * &self.inv_sqrt))
    }

    /// `X^{1/2} A X^{1/2}`
    pub fn color(&self, a: &Mat) -> Mat {
        sym(&(&self.sqrt * a * &self.sqrt))
    }
}

/// First divided difference of `ln` used by the Daleckii-Krein formula.
fn log_divided_difference(a: f64, b: f64) -> f64 {
    let diff = a - b;
    if diff.abs() <= 1e-8 * a.abs().max(b.abs()) {
        2.0 / (a + b)
    } else {
        (a.ln() - b.ln()) / diff
    }
}

/// Fréchet derivative of `logm` at the SPD matrix whose eigendecomposition is
/// `eig`, applied to the symmetric direction `e`. The map is self-adjoint in the
/// Frobenius inner product.
pub fn dlogm(eig: &SymEig, e: &Mat) -> Mat {
    let n = eig.values.len();
    let mut inner = eig.to_eigbasis(e);
    for i in 0..n {
        for j in 0..n {
            inner[(i, j)] *= log_divided_difference(eig.values[i], eig.values[j]);
        }
    }
    sym(&eig.from_eigbasis(&inner))
}

/// Solves `G A + A G = C` for SPD `A` and symmetric `C`.
pub fn lyapunov_solve(a: &Mat, c: &Mat) -> Result<Mat> {
    require_symmetric(a, "lyapunov_solve")?;
    if c.shape() != a.shape() {
        return Err(Error::contract("lyapunov_solve: A and C shapes differ"));
    }
    let eig = SymEig::new(a);
    if !(eig.min_value() > 0.0) {
        return Err(Error::contract(format!(
            "lyapunov_solve: A is not positive definite (min eigenvalue {:.3e})",
            eig.min_value()
        )));
    }
    Ok(lyapunov_refined(&eig, &sym(a), c))
}

/// Lyapunov solve with a precomputed eigendecomposition of `A`; one step of
/// iterative refinement is applied to the eigenbasis solution.
pub fn lyapunov_solve_eig(eig: &SymEig, c: &Mat) -> Mat {
    lyapunov_refined(eig, &eig.map(|l| l), c)
}

/// Eigenbasis solve followed by one refinement step against the residual in `a`.
fn lyapunov_refined(eig: &SymEig, a: &Mat, c: &Mat) -> Mat {
    let solve = |rhs: &Mat| {
        let mut t = eig.to_eigbasis(rhs);
        let n = eig.values.len();
        for i in 0..n {
            for j in 0..n {
                t[(i, j)] /= eig.values[i] + eig.values[j];
            }
        }
        sym(&eig.from_eigbasis(&t))
    };
    let c = sym(c);
    let mut g = solve(&c);
    let residual = &c - (&g * a + a * &g);
    g += solve(&residual);
    g
}

/// Result of a Sinkhorn balancing run: `plan = diag(a) K diag(b)`.
#[derive(Debug, Clone)]
pub struct SinkhornOutput {
    pub plan: Mat,
    pub row_scaling: Vector,
    pub col_scaling: Vector,
    pub iterations: usize,
    pub residual: f64,
}

/// L1 marginal residual `‖Γ1 − μ‖₁ + ‖Γᵀ1 − ν‖₁`.
pub fn marginal_residual(plan: &Mat, mu: &Vector, nu: &Vector) -> f64 {
    let rows: f64 = plan
        .row_iter()
        .zip(mu.iter())
        .map(|(r, m)| (r.sum() - m).abs())
        .sum();
    let cols: f64 = plan
        .column_iter()
        .zip(nu.iter())
        .map(|(c, n)| (c.sum() - n).abs())
        .sum();
    rows + cols
}

/// Sinkhorn-Knopp balancing of a positive matrix to marginals `mu`, `nu`.
pub fn sinkhorn(k: &Mat, mu: &Vector, nu: &Vector, tol: f64, max_iters: usize) -> Result<SinkhornOutput> {
    let (m, n) = k.shape();
    if mu.len() != m || nu.len() != n {
        return Err(Error::contract(format!(
            "sinkhorn: marginal lengths ({}, {}) do not match {m}x{n}",
            mu.len(),
            nu.len()
        )));
    }
    if (mu.sum() - nu.sum()).abs() > 1e-12 * mu.sum().abs().max(1.0) {
        return Err(Error::contract(format!(
            "sinkhorn: marginal masses differ ({} vs {})",
            mu.sum(),
            nu.sum()
        )));
    }
    if k.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::numeric("sinkhorn: kernel must be finite and entrywise positive"));
    }
    let mut a = Vector::from_element(m, 1.0);
    let mut b = Vector::from_element(n, 1.0);
    let plan_of = |a: &Vector, b: &Vector| {
        let mut p = k.clone();
        for i in 0..m {
            for j in 0..n {
                p[(i, j)] *= a[i] * b[j];
            }
        }
        p
    };
    let mut residual = marginal_residual(k, mu, nu);
    let mut iterations = 0;
    while residual > tol {
        if iterations >= max_iters {
            return Err(Error::numeric(format!(
                "sinkhorn: no convergence after {max_iters} iterations (residual {residual:.3e})"
            )));
        }
        let kb = k * &b;
        for i in 0..m {
            a[i] = mu[i] / kb[i];
        }
        let kta = k.tr_mul(&a);
        for j in 0..n {
            b[j] = nu[j] / kta[j];
        }
        iterations += 1;
        residual = marginal_residual(&plan_of(&a, &b), mu, nu);
        if !residual.is_finite() {
            return Err(Error::numeric(format!(
                "sinkhorn: scaling overflowed at iteration {iterations}"
            )));
        }
    }
    Ok(SinkhornOutput {
        plan: plan_of(&a, &b),
        row_scaling: a,
        col_scaling: b,
        iterations,
        residual,
    })
}

/// Q factor of the thin QR decomposition with `diag(R) ≥ 0`.
pub fn qf(a: &Mat) -> Result<Mat> {
    let (rows, cols) = a.shape();
    if rows < cols {
        return Err(Error::contract(format!("qf: need rows >= cols, got {rows}x{cols}")));
    }
    let qr = a.clone().qr();
    let r = qr.r();
    let mut q = qr.q();
    let scale = r.diagonal().amax().max(f64::MIN_POSITIVE);
    for j in 0..cols {
        let rjj = r[(j, j)];
        if rjj.abs() <= 1e-13 * scale || !rjj.is_finite() {
            return Err(Error::numeric(format!(
                "qf: rank-deficient input (|R[{j},{j}]| = {:.3e})",
                rjj.abs()
            )));
        }
        if rjj < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    Ok(q)
}

/// Matrix of independent standard normal entries.
pub fn gaussian(rows: usize, cols: usize, rng: &mut dyn RngCore) -> Mat {
    Mat::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Symmetric matrix → vector, upper triangle row-major with off-diagonals
/// scaled by √2 so the Euclidean and Frobenius inner products agree.
pub fn vec_sym(s: &Mat) -> Vector {
    let n = s.nrows();
    let mut out = Vector::zeros(n * (n + 1) / 2);
    let mut k = 0;
    for i in 0..n {
        for j in i..n {
            out[k] = if i == j {
                s[(i, j)]
            } else {
                std::f64::consts::SQRT_2 * s[(i, j)]
            };
            k += 1;
        }
    }
    out
}

/// Inverse (and adjoint) of [`vec_sym`].
pub fn unvec_sym(v: &Vector, n: usize) -> Mat {
    assert_eq!(v.len(), n * (n + 1) / 2, "unvec_sym: length mismatch");
    let mut s = Mat::zeros(n, n);
    let mut k = 0;
    for i in 0..n {
        for j in i..n {
            if i == j {
                s[(i, i)] = v[k];
            } else {
                let val = v[k] / std::f64::consts::SQRT_2;
                s[(i, j)] = val;
                s[(j, i)] = val;
            }
            k += 1;
        }
    }
    s
}
