use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rhgd::linalg::{
    expm_sym, gaussian, logm_spd, lyapunov_solve, marginal_residual, sinkhorn, spd_inverse, sqrtm_spd, sym, Mat,
    SymEig, Vector,
};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random SPD matrix with log-spaced spectrum of condition number `cond`.
fn spd_with_condition(n: usize, cond: f64, r: &mut ChaCha8Rng) -> Mat {
    let q = nalgebra::linalg::QR::new(gaussian(n, n, r)).q();
    let top = cond.sqrt();
    let eigs = Vector::from_fn(n, |i, _| {
        let t = if n == 1 { 0.0 } else { i as f64 / (n - 1) as f64 };
        top.powf(2.0 * t - 1.0)
    });
    sym(&(&q * Mat::from_diagonal(&eigs) * q.transpose()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn lyapunov_residual_is_tiny(seed in any::<u64>(), idx in 0usize..3, log_cond in 0.0f64..6.0) {
        let n = [2, 5, 20][idx];
        let mut r = rng(seed);
        let a = spd_with_condition(n, 10f64.powf(log_cond), &mut r);
        let c = sym(&gaussian(n, n, &mut r));
        let g = lyapunov_solve(&a, &c).unwrap();
        let res = (&g * &a + &a * &g - &c).norm() / c.norm();
        prop_assert!(res <= 1e-10, "n={n} residual {res:e}");
        prop_assert!((&g - g.transpose()).norm() <= 1e-12 * (1.0 + g.norm()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn sinkhorn_balances_positive_matrices(seed in any::<u64>(), spread in 0.1f64..2.0) {
        let mut r = rng(seed);
        let k = gaussian(50, 50, &mut r).map(|v| (v * spread).exp());
        let mu = Vector::from_element(50, 1.0 / 50.0);
        let out = sinkhorn(&k, &mu, &mu, 1e-10, 10_000).unwrap();
        prop_assert!(marginal_residual(&out.plan, &mu, &mu) <= 1e-10);
        let rebuilt = Mat::from_diagonal(&out.row_scaling) * &k * Mat::from_diagonal(&out.col_scaling);
        prop_assert!((rebuilt - &out.plan).norm() <= 1e-12);
    }

    #[test]
    fn matrix_functions_agree(seed in any::<u64>()) {
        let mut r = rng(seed);
        let a = spd_with_condition(6, 100.0, &mut r);
        let l = logm_spd(&a).unwrap();
        prop_assert!((expm_sym(&l).unwrap() - &a).norm() <= 1e-10 * a.norm());
        let s = sqrtm_spd(&a).unwrap();
        prop_assert!((&s * &s - &a).norm() <= 1e-10 * a.norm());
        let inv = spd_inverse(&a).unwrap();
        prop_assert!((&inv * &a - Mat::identity(6, 6)).norm() <= 1e-10);
    }
}

#[test]
fn lyapunov_known_solution() {
    let a = Mat::from_diagonal(&Vector::from_vec(vec![1.0, 2.0]));
    let c = Mat::from_row_slice(2, 2, &[2.0, 3.0, 3.0, 8.0]);
    let g = lyapunov_solve(&a, &c).unwrap();
    assert!((g - Mat::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 2.0])).norm() < 1e-14);
}

#[test]
fn sinkhorn_rejects_mismatched_marginals() {
    let k = Mat::from_element(2, 3, 1.0);
    assert!(sinkhorn(&k, &Vector::from_element(3, 1.0 / 3.0), &Vector::from_element(3, 1.0 / 3.0), 1e-10, 10).is_err());
}

#[test]
fn eigen_helpers_report_extremes() {
    let a = Mat::from_diagonal(&Vector::from_vec(vec![3.0, 0.5, 2.0]));
    let e = SymEig::new(&a);
    assert_eq!(e.min_value(), 0.5);
    assert_eq!(e.max_value(), 3.0);
}
