use nalgebra::Cholesky;
use rand::{Rng, RngCore};

use super::check_shape;
use crate::error::{Error, Result};
use crate::geometry::{Manifold, TOL_MEM};
use crate::linalg::{gaussian, marginal_residual, sinkhorn, Mat, Vector};

/// Strictly positive `m × n` matrices with prescribed row sums `mu` and column
/// sums `nu`, under the Fisher metric `⟨U, V⟩_Γ = Σ U_ij V_ij / Γ_ij`.
///
/// `exp`, `log` and parallel transport integrate the geodesic equations in
/// square-root coordinates `s = √Γ`, where the metric is Euclidean.
#[derive(Debug, Clone, PartialEq)]
pub struct DoublyStochastic {
    mu: Vector,
    nu: Vector,
    sinkhorn_tol: f64,
    sinkhorn_max_iters: usize,
}

/// Row/column Lagrange multipliers of the normal component.
struct Multipliers {
    alpha: Vector,
    beta: Vector,
}

impl Multipliers {
    fn matrix(&self) -> Mat {
        Mat::from_fn(self.alpha.len(), self.beta.len(), |i, j| self.alpha[i] + self.beta[j])
    }
}

const LOG_MAX_ITERS: usize = 200;

impl DoublyStochastic {
    pub fn new(mu: Vector, nu: Vector) -> Result<Self> {
        if mu.is_empty() || nu.is_empty() {
            return Err(Error::contract("doubly stochastic: empty marginal"));
        }
        if mu.iter().chain(nu.iter()).any(|v| !(*v > 0.0)) {
            return Err(Error::contract("doubly stochastic: marginals must be positive"));
        }
        if (mu.sum() - nu.sum()).abs() > 1e-12 * mu.sum().max(1.0) {
            return Err(Error::contract(format!(
                "doubly stochastic: marginal masses differ ({} vs {})",
                mu.sum(),
                nu.sum()
            )));
        }
        Ok(Self {
            mu,
            nu,
            sinkhorn_tol: 1e-10,
            sinkhorn_max_iters: 10_000,
        })
    }

    /// Uniform marginals of unit mass.
    pub fn uniform(m: usize, n: usize) -> Result<Self> {
        Self::new(
            Vector::from_element(m, 1.0 / m as f64),
            Vector::from_element(n, 1.0 / n as f64),
        )
    }

    pub fn with_sinkhorn(mut self, tol: f64, max_iters: usize) -> Self {
        self.sinkhorn_tol = tol;
        self.sinkhorn_max_iters = max_iters;
        self
    }

    pub fn mu(&self) -> &Vector {
        &self.mu
    }

    pub fn nu(&self) -> &Vector {
        &self.nu
    }

    pub fn sinkhorn_tol(&self) -> f64 {
        self.sinkhorn_tol
    }

    fn m(&self) -> usize {
        self.mu.len()
    }

    fn n(&self) -> usize {
        self.nu.len()
    }

    /// Balances a positive matrix onto the manifold.
    pub fn balance(&self, k: &Mat) -> Result<Mat> {
        Ok(sinkhorn(k, &self.mu, &self.nu, self.sinkhorn_tol, self.sinkhorn_max_iters)?.plan)
    }

    /// Solves `α_i (Γ1)_i + (Γβ)_i = r_i`, `(Γᵀα)_j + β_j (Γᵀ1)_j = c_j` with
    /// `β_{n-1} = 0`.
    fn multipliers(&self, gamma: &Mat, rows: &Vector, cols: &Vector) -> Result<Multipliers> {
        let (m, n) = gamma.shape();
        let size = m + n - 1;
        let row_mass = gamma.column_sum();
        let col_mass = gamma.row_sum().transpose();
        let mut sys = Mat::zeros(size, size);
        let mut rhs = Vector::zeros(size);
        for i in 0..m {
            sys[(i, i)] = row_mass[i];
            rhs[i] = rows[i];
            for j in 0..n - 1 {
                sys[(i, m + j)] = gamma[(i, j)];
                sys[(m + j, i)] = gamma[(i, j)];
            }
        }
        for j in 0..n - 1 {
            sys[(m + j, m + j)] = col_mass[j];
            rhs[m + j] = cols[j];
        }
        let chol = Cholesky::new(sys)
            .ok_or_else(|| Error::numeric("doubly stochastic: multiplier system is not positive definite"))?;
        let sol = chol.solve(&rhs);
        let alpha = sol.rows(0, m).into_owned();
        let mut beta = Vector::zeros(n);
        beta.rows_mut(0, n - 1).copy_from(&sol.rows(m, n - 1));
        Ok(Multipliers { alpha, beta })
    }

    fn multipliers_of(&self, gamma: &Mat, z: &Mat) -> Result<Multipliers> {
        self.multipliers(gamma, &z.column_sum(), &z.row_sum().transpose())
    }

    fn try_proj(&self, gamma: &Mat, z: &Mat) -> Result<Mat> {
        let mult = self.multipliers_of(gamma, z)?;
        Ok(z - mult.matrix().component_mul(gamma))
    }

    /// Normal acceleration `−(a_i + b_j) s_ij` keeping the square-root
    /// coordinates on the constraint set given the velocity pairing `q`.
    fn normal_term(&self, s: &Mat, q: &Mat) -> Result<Mat> {
        let gamma = s.component_mul(s);
        let mult = self.multipliers_of(&gamma, q)?;
        Ok(-mult.matrix().component_mul(s))
    }

    fn steps_for(&self, gamma: &Mat, u: &Mat) -> usize {
        let speed = u
            .iter()
            .zip(gamma.iter())
            .map(|(a, g)| (a / g).abs())
            .fold(0.0, f64::max);
        ((64.0 * (1.0 + speed)).ceil() as usize).min(4096)
    }

    /// RK4 integration of the geodesic from `gamma` with initial velocity `u`,
    /// optionally carrying a parallel field `w0` (in Γ coordinates).
    fn integrate(&self, gamma: &Mat, u: &Mat, w0: Option<&Mat>) -> Result<(Mat, Option<Mat>)> {
        let mut s = gamma.map(f64::sqrt);
        let mut v = u.component_div(&(&s * 2.0));
        let mut w = w0.map(|w| w.component_div(&(&s * 2.0)));
        let steps = self.steps_for(gamma, u);
        let h = 1.0 / steps as f64;
        let deriv = |s: &Mat, v: &Mat, w: Option<&Mat>| -> Result<(Mat, Mat, Option<Mat>)> {
            let acc = self.normal_term(s, &v.component_mul(v))?;
            let wdot = match w {
                Some(w) => Some(self.normal_term(s, &v.component_mul(w))?),
                None => None,
            };
            Ok((v.clone(), acc, wdot))
        };
        let axpy = |a: &Mat, b: &Mat, t: f64| a + b * t;
        for _ in 0..steps {
            let (k1s, k1v, k1w) = deriv(&s, &v, w.as_ref())?;
            let w2 = w.as_ref().zip(k1w.as_ref()).map(|(w, k)| axpy(w, k, 0.5 * h));
            let (k2s, k2v, k2w) = deriv(&axpy(&s, &k1s, 0.5 * h), &axpy(&v, &k1v, 0.5 * h), w2.as_ref())?;
            let w3 = w.as_ref().zip(k2w.as_ref()).map(|(w, k)| axpy(w, k, 0.5 * h));
            let (k3s, k3v, k3w) = deriv(&axpy(&s, &k2s, 0.5 * h), &axpy(&v, &k2v, 0.5 * h), w3.as_ref())?;
            let w4 = w.as_ref().zip(k3w.as_ref()).map(|(w, k)| axpy(w, k, h));
            let (k4s, k4v, k4w) = deriv(&axpy(&s, &k3s, h), &axpy(&v, &k3v, h), w4.as_ref())?;
            s += (k1s + k2s * 2.0 + k3s * 2.0 + k4s) * (h / 6.0);
            v += (k1v + k2v * 2.0 + k3v * 2.0 + k4v) * (h / 6.0);
            if let (Some(w), Some(k1), Some(k2), Some(k3), Some(k4)) = (w.as_mut(), k1w, k2w, k3w, k4w) {
                *w += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
            }
        }
        if s.iter().any(|x| !x.is_finite()) {
            return Err(Error::numeric("doubly stochastic: geodesic integration diverged"));
        }
        let w_end = w.map(|w| w.component_mul(&(&s * 2.0)));
        Ok((s.component_mul(&s), w_end))
    }
}

impl Manifold for DoublyStochastic {
    fn id(&self) -> String {
        format!("doubly_stochastic({}x{})", self.m(), self.n())
    }

    fn dim(&self) -> usize {
        (self.m() - 1) * (self.n() - 1)
    }

    fn ambient_shape(&self) -> (usize, usize) {
        (self.m(), self.n())
    }

    fn check_point(&self, x: &Mat) -> Result<()> {
        check_shape("doubly stochastic point", x, self.ambient_shape())?;
        if x.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::contract("doubly stochastic point must be strictly positive"));
        }
        let res = marginal_residual(x, &self.mu, &self.nu);
        if res > self.sinkhorn_tol {
            return Err(Error::contract(format!("doubly stochastic point misses marginals (residual {res:.3e})")));
        }
        Ok(())
    }

    fn check_tangent(&self, _x: &Mat, u: &Mat) -> Result<()> {
        check_shape("doubly stochastic tangent", u, self.ambient_shape())?;
        let zero_m = Vector::zeros(self.m());
        let zero_n = Vector::zeros(self.n());
        let res = marginal_residual(u, &zero_m, &zero_n);
        let scale = 1.0 + u.iter().map(|v| v.abs()).sum::<f64>();
        if res > TOL_MEM * scale {
            return Err(Error::contract(format!(
                "doubly stochastic tangent has nonzero row/column sums ({res:.3e})"
            )));
        }
        Ok(())
    }

    fn inner(&self, x: &Mat, u: &Mat, v: &Mat) -> f64 {
        u.iter().zip(v.iter()).zip(x.iter()).map(|((a, b), g)| a * b / g).sum()
    }

    fn exp(&self, x: &Mat, u: &Mat) -> Result<Mat> {
        let (gamma, _) = self.integrate(x, u, None)?;
        self.balance(&gamma)
    }

    fn log(&self, x: &Mat, y: &Mat) -> Result<Mat> {
        let mut v = self.try_proj(x, &(y - x))?;
        let mut last = f64::INFINITY;
        for _ in 0..LOG_MAX_ITERS {
            let e = self.exp(x, &v)?;
            let r = self.try_proj(x, &(y - e))?;
            v += &r;
            let rn = self.norm(x, &r);
            if rn <= 1e-14 * (1.0 + self.norm(x, &v)) || (rn >= last && rn <= 1e-11 * (1.0 + self.norm(x, &v))) {
                return Ok(v);
            }
            if !rn.is_finite() || rn > 1e3 * (1.0 + self.norm(x, &v)) {
                break;
            }
            last = rn;
        }
        Err(Error::numeric(format!(
            "doubly stochastic log: shooting did not converge (last correction {last:.3e})"
        )))
    }

    fn retract(&self, x: &Mat, u: &Mat) -> Result<Mat> {
        let k = x.zip_map(u, |g, a| g * (a / g).exp());
        if k.iter().any(|v| !v.is_finite()) {
            return Err(Error::numeric("doubly stochastic retraction overflowed"));
        }
        self.balance(&k)
    }

    fn transport(&self, from: &Mat, to: &Mat, u: &Mat) -> Result<Mat> {
        if from == to {
            return Ok(u.clone());
        }
        let v = self.log(from, to)?;
        let (_, w) = self.integrate(from, &v, Some(u))?;
        let w = w.ok_or_else(|| Error::numeric("doubly stochastic transport lost its field"))?;
        self.try_proj(to, &w)
    }

    fn proj(&self, x: &Mat, a: &Mat) -> Mat {
        self.try_proj(x, a)
            .unwrap_or_else(|_| Mat::from_element(a.nrows(), a.ncols(), f64::NAN))
    }

    fn proj_adjoint(&self, from: &Mat, to: &Mat, v: &Mat) -> Mat {
        let scaled = v.component_mul(from).component_div(to);
        self.proj(from, &scaled)
    }

    fn egrad_to_rgrad(&self, x: &Mat, eg: &Mat) -> Mat {
        self.proj(x, &eg.component_mul(x))
    }

    fn ehess_to_rhess(&self, x: &Mat, eg: &Mat, ehess_u: &Mat, u: &Mat) -> Result<Mat> {
        let gamma_g = eg.component_mul(x);
        let s = self.multipliers_of(x, &gamma_g)?.matrix();
        let grad = &gamma_g - s.component_mul(x);
        let gdot = ehess_u.component_mul(x) + eg.component_mul(u);
        let s_xi = s.component_mul(u);
        let sdot = self.multipliers_of(x, &(&gdot - &s_xi))?.matrix();
        let delta = &gdot - sdot.component_mul(x) - s_xi;
        let correction = u.component_mul(&grad).component_div(&(x * 2.0));
        self.try_proj(x, &(delta - correction))
    }

    fn rand_point(&self, rng: &mut dyn RngCore) -> Mat {
        let k = Mat::from_fn(self.m(), self.n(), |_, _| rng.random_range(0.5..1.5));
        self.balance(&k).expect("sinkhorn on a well-conditioned positive kernel")
    }

    fn rand_tangent(&self, x: &Mat, rng: &mut dyn RngCore) -> Mat {
        let z = gaussian(self.m(), self.n(), rng).component_mul(x);
        let u = self.proj(x, &z);
        let n = self.norm(x, &u);
        u / n
    }

    fn normalize(&self, x: &Mat) -> Result<Mat> {
        if x.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::numeric("doubly stochastic iterate lost positivity"));
        }
        self.balance(x)
    }
}
