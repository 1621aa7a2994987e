use nalgebra::dmatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rhgd::geometry::MapMode;
use rhgd::hypergrad::{
    estimate, estimate_ad, estimate_ad_forward, estimate_cg, estimate_hinv, estimate_hinv_or_cg, estimate_ns,
    fd_hypergrad_oracle, inner_loop, solve_lower, EstimatorConfig, EstimatorKind,
};
use rhgd::linalg::Mat;
use rhgd::problem::{Batch, BilevelProblem, EstimatorBatches, OtDomainAdaptation, QuadraticOracle, SyntheticStiefelSpd};
use rhgd::tscg::TscgConfig;
use rhgd::Error;

fn synthetic(seed: u64) -> (SyntheticStiefelSpd, Mat, Mat) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = SyntheticStiefelSpd::generate(12, 6, 3, 0.01, &mut rng).unwrap();
    let x = p.upper().rand_point(&mut rng);
    let y = p.lower().rand_point(&mut rng);
    (p, x, y)
}

fn quadratic() -> (QuadraticOracle, Mat) {
    (QuadraticOracle::new(dmatrix![2.0, 0.0; 0.0, 1.0]).unwrap(), dmatrix![1.0; 1.0])
}

#[test]
fn quadratic_estimators_match_closed_form() {
    let (p, x) = quadratic();
    let truth = dmatrix![4.0; 1.0];
    assert_eq!(p.exact_hypergradient(&x), truth);
    let y = p.lower_solution(&x).unwrap().unwrap();
    let b = EstimatorBatches::full();
    let hinv = estimate_hinv(&p, &x, &y, &b).unwrap().value;
    assert!((hinv - &truth).norm() <= 1e-12);
    let cg = estimate_cg(&p, &x, &y, &TscgConfig::default(), &b).unwrap().value;
    assert!((cg - &truth).norm() <= 1e-8);
    let cfg = EstimatorConfig {
        ns_t: 50,
        ns_gamma: 0.4,
        ..EstimatorConfig::new(EstimatorKind::Ns)
    };
    let ns = estimate_ns(&p, &x, &y, &cfg, &b).unwrap().value;
    assert!((ns - &truth).norm() <= 1e-5);
}

#[test]
fn unrolled_reverse_matches_forward_sweep() {
    let (p, x, y0) = synthetic(3);
    let tape = inner_loop(&p, &x, &y0, 8, 0.3, MapMode::Exponential, || Batch::Full).unwrap();
    let cfg = EstimatorConfig {
        ad_s: 8,
        ..EstimatorConfig::new(EstimatorKind::Ad)
    };
    let rev = estimate(&p, &x, tape.last(), &cfg, &EstimatorBatches::full(), Some(&tape)).unwrap().value;
    let fwd = estimate_ad_forward(&p, &x, &tape, &Batch::Full).unwrap();
    assert!((&rev - &fwd).norm() <= 1e-9 * (1.0 + fwd.norm()), "{rev} vs {fwd}");
}

#[test]
fn unrolled_requires_tape() {
    let (p, x, y) = synthetic(4);
    let cfg = EstimatorConfig::new(EstimatorKind::Ad);
    let err = estimate(&p, &x, &y, &cfg, &EstimatorBatches::full(), None).unwrap_err();
    assert!(matches!(err, Error::Contract(_)));
}

#[test]
fn iterative_estimators_approach_inverse_hessian() {
    let (p, x, y0) = synthetic(5);
    let y = solve_lower(&p, &x, &y0, 1e-12, 50).unwrap();
    let b = EstimatorBatches::full();
    let hinv = estimate_hinv(&p, &x, &y, &b).unwrap().value;
    let cg_cfg = TscgConfig {
        max_iters: 200,
        residual_tol: 1e-13,
        warm_start: None,
    };
    let cg = estimate_cg(&p, &x, &y, &cg_cfg, &b).unwrap().value;
    assert!((&cg - &hinv).norm() <= 1e-8 * (1.0 + hinv.norm()));
    let mut errs = Vec::new();
    for t in [5, 20, 80] {
        let cfg = EstimatorConfig {
            ns_t: t,
            ..EstimatorConfig::new(EstimatorKind::Ns)
        };
        errs.push((estimate_ns(&p, &x, &y, &cfg, &b).unwrap().value - &hinv).norm());
    }
    assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
}

#[test]
fn inverse_hessian_agrees_with_finite_differences() {
    let (p, x, y0) = synthetic(6);
    let y = solve_lower(&p, &x, &y0, 1e-10, 50).unwrap();
    let hinv = estimate_hinv(&p, &x, &y, &EstimatorBatches::full()).unwrap().value;
    let fd = fd_hypergrad_oracle(&p, &x, &y, 1e-5, 1e-10).unwrap();
    assert!((&hinv - &fd).norm() <= 1e-4 * (1.0 + fd.norm()), "{}", (&hinv - &fd).norm());
}

#[test]
fn unrolled_converges_with_depth() {
    let (p, x, y0) = synthetic(7);
    let b = EstimatorBatches::full();
    let y = solve_lower(&p, &x, &y0, 1e-12, 50).unwrap();
    let truth = estimate_hinv(&p, &x, &y, &b).unwrap().value;
    let mut errs = Vec::new();
    for s in [10, 40, 160] {
        let cfg = EstimatorConfig {
            ad_s: s,
            ad_eta_y: 0.5,
            ..EstimatorConfig::new(EstimatorKind::Ad)
        };
        let (est, _) = estimate_ad(&p, &x, &y0, &cfg, MapMode::Exponential).unwrap();
        errs.push((est.value - &truth).norm());
    }
    assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
}

#[test]
fn missing_inverse_hessian_is_unsupported_then_falls_back() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let x = rhgd::linalg::gaussian(5, 3, &mut rng);
    let y = rhgd::linalg::gaussian(5, 3, &mut rng);
    let p = OtDomainAdaptation::new(x, y, 0.5, 0.0).unwrap();
    let gamma = p.upper().rand_point(&mut rng);
    let m = solve_lower(&p, &gamma, &p.lower().rand_point(&mut rng), 1e-10, 50).unwrap();
    let b = EstimatorBatches::full();
    assert!(matches!(estimate_hinv(&p, &gamma, &m, &b), Err(Error::Unsupported(_))));
    let est = estimate_hinv_or_cg(&p, &gamma, &m, &b).unwrap();
    assert_eq!(est.diagnostics.method, "hinv-via-cg");
}

/// Largest `|⟨AD, ξ⟩ − δ|` over random `ξ`, where `δ` is a central difference of
/// `x ↦ f(x, y_S(x))` with the inner loop replayed from the same start.
fn unrolled_directional_error(p: &dyn BilevelProblem, x: &Mat, y0: &Mat, s: usize, eta: f64, seed: u64) -> f64 {
    let tape = inner_loop(p, x, y0, s, eta, MapMode::Exponential, || Batch::Full).unwrap();
    let cfg = EstimatorConfig {
        ad_s: s,
        ad_eta_y: eta,
        ..EstimatorConfig::new(EstimatorKind::Ad)
    };
    let ad = estimate(p, x, tape.last(), &cfg, &EstimatorBatches::full(), Some(&tape)).unwrap().value;
    let phi = |t: f64, xi: &Mat| {
        let xt = p.upper().exp_or_retract(x, &(xi * t)).unwrap();
        let yt = inner_loop(p, &xt, y0, s, eta, MapMode::Exponential, || Batch::Full).unwrap();
        p.upper_objective(&xt, yt.last(), &Batch::Full).unwrap()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..4 {
        let xi = p.upper().rand_tangent(x, &mut rng);
        let h = 1e-5;
        let fd = (phi(h, &xi) - phi(-h, &xi)) / (2.0 * h);
        worst = worst.max((fd - p.upper().inner(x, &ad, &xi)).abs());
    }
    worst
}

#[test]
fn unrolled_matches_differenced_inner_loop_in_euclidean_space() {
    let (p, x) = quadratic();
    let err = unrolled_directional_error(&p, &x, &dmatrix![0.3; -0.2], 10, 0.3, 1);
    assert!(err <= 1e-6, "{err:e}");
}

#[test]
fn unrolled_matches_differenced_inner_loop_on_curved_spaces() {
    for seed in 0..3 {
        let (p, x, y) = synthetic(20 + seed);
        // the solver restarts each inner loop from the previous one
        let warm = inner_loop(&p, &x, &y, 20, 0.5, MapMode::Exponential, || Batch::Full).unwrap();
        let y0 = warm.last();
        let short = unrolled_directional_error(&p, &x, y0, 10, 0.1, seed);
        let long = unrolled_directional_error(&p, &x, y0, 10, 0.3, seed);
        assert!(short <= 1e-3, "seed {seed}: {short:e}");
        assert!(short < long, "seed {seed}: residual should shrink with the step, {short:e} vs {long:e}");
    }
}

#[test]
fn truncated_neumann_error_decreases_with_terms() {
    let (p, x, y0) = synthetic(30);
    let y = solve_lower(&p, &x, &y0, 1e-12, 50).unwrap();
    let b = EstimatorBatches::full();
    let truth = estimate_hinv(&p, &x, &y, &b).unwrap().value;
    let mut prev = f64::INFINITY;
    for t in [1, 2, 4, 8, 16, 32] {
        let cfg = EstimatorConfig {
            ns_t: t,
            ..EstimatorConfig::new(EstimatorKind::Ns)
        };
        let err = (estimate_ns(&p, &x, &y, &cfg, &b).unwrap().value - &truth).norm();
        assert!(err < prev, "T={t}: {err:e} !< {prev:e}");
        prev = err;
    }
}
