//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::dmatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rhgd::experiment::config::{ExperimentConfig, ProblemConfig, SolverSection};
use rhgd::experiment::ot_demo::ot_demo;
use rhgd::geometry::{Manifold, MapMode};
use rhgd::hypergrad::{
    estimate, estimate_ad, estimate_ad_tape, estimate_cg, estimate_hinv, estimate_ns, fd_hypergrad_oracle, inner_loop,
    solve_lower, EstimatorConfig, EstimatorKind,
};
use rhgd::linalg::{gaussian, lyapunov_solve, marginal_residual, sinkhorn, sym, Mat, Vector};
use rhgd::manifolds::{DoublyStochastic, Euclidean, Spd, SpdRetraction, Stiefel};
use rhgd::problem::{
    Batch, BatchSizes, BilevelProblem, BilinearSaddle, EstimatorBatches, HyperRep, HyperRepData, MinMax,
    QuadraticOracle, SyntheticStiefelSpd,
};
use rhgd::solver::{rhgd, rhgd_minmax, rshgd, SolverConfig, Trace};
use rhgd::tscg::TscgConfig;

type Check = Result<Vec<String>, String>;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn fail<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn quadratic_oracle() -> Check {
    let p = QuadraticOracle::new(dmatrix![2.0, 0.0; 0.0, 1.0]).map_err(fail)?;
    let x = dmatrix![1.0; 1.0];
    let truth = dmatrix![4.0; 1.0];
    let y = p.lower_solution(&x).unwrap().map_err(fail)?;
    let b = EstimatorBatches::full();
    let hinv = (estimate_hinv(&p, &x, &y, &b).map_err(fail)?.value - &truth).abs().max();
    let cg = (estimate_cg(&p, &x, &y, &TscgConfig::default(), &b).map_err(fail)?.value - &truth).abs().max();
    let ns_cfg = EstimatorConfig {
        ns_t: 50,
        ns_gamma: 0.4,
        ..EstimatorConfig::new(EstimatorKind::Ns)
    };
    let ns = (estimate_ns(&p, &x, &y, &ns_cfg, &b).map_err(fail)?.value - &truth).abs().max();
    let ad_cfg = EstimatorConfig {
        ad_s: 200,
        ad_eta_y: 0.5,
        ..EstimatorConfig::new(EstimatorKind::Ad)
    };
    let (ad, _) = estimate_ad(&p, &x, &Mat::zeros(2, 1), &ad_cfg, MapMode::Exponential).map_err(fail)?;
    let ad = (ad.value - &truth).abs().max();
    ensure(hinv <= 1e-8, format!("hinv error {hinv:e}"))?;
    ensure(cg <= 1e-8, format!("cg error {cg:e}"))?;
    ensure(ns <= 1e-5, format!("ns error {ns:e}"))?;
    ensure(ad <= 1e-5, format!("ad error {ad:e}"))?;
    Ok(vec![format!("max abs errors hinv {hinv:.1e}, cg {cg:.1e}, ns {ns:.1e}, ad {ad:.1e}")])
}

fn small_synthetic(seed: u64) -> Result<(SyntheticStiefelSpd, Mat, Mat), String> {
    let mut r = rng(seed);
    let p = SyntheticStiefelSpd::generate(12, 6, 3, 0.01, &mut r).map_err(fail)?;
    let x = p.upper().rand_point(&mut r);
    let y = p.lower().rand_point(&mut r);
    Ok((p, x, y))
}

fn hinv_vs_fd() -> Check {
    let (p, x, y0) = small_synthetic(2)?;
    let y = solve_lower(&p, &x, &y0, 1e-10, 50).map_err(fail)?;
    let hinv = estimate_hinv(&p, &x, &y, &EstimatorBatches::full()).map_err(fail)?.value;
    let fd = fd_hypergrad_oracle(&p, &x, &y, 1e-5, 1e-10).map_err(fail)?;
    let err = (&hinv - &fd).norm();
    let bound = 1e-4 * (1.0 + fd.norm());
    ensure(err <= bound, format!("error {err:e} > {bound:e}"))?;
    Ok(vec![format!("|hinv - fd| = {err:.2e} (bound {bound:.2e})")])
}

fn list(errs: &[f64]) -> String {
    errs.iter().map(|e| format!("{e:.2e}")).collect::<Vec<_>>().join(", ")
}

fn non_increasing(label: &str, errs: &[f64]) -> Result<(), String> {
    for w in errs.windows(2) {
        ensure(w[1] <= 1.1 * w[0], format!("{label} errors not decaying: {}", list(errs)))?;
    }
    Ok(())
}

fn error_decay() -> Check {
    let (p, x, y0) = small_synthetic(1)?;
    let eta_y = 1.5;
    let b = EstimatorBatches::full();
    let y_star = p.lower_solution(&x).unwrap().map_err(fail)?;
    let fd = fd_hypergrad_oracle(&p, &x, &y_star, 1e-5, 1e-10).map_err(fail)?;
    let cg = TscgConfig {
        max_iters: 50,
        residual_tol: 1e-12,
        warm_start: None,
    };
    let ns = EstimatorConfig {
        ns_t: 50,
        ns_gamma: 1.0,
        ..EstimatorConfig::new(EstimatorKind::Ns)
    };
    let mut by_kind = vec![Vec::new(); 4];
    for s in [5, 10, 20, 40] {
        let tape = inner_loop(&p, &x, &y0, s, eta_y, MapMode::Exponential, || Batch::Full).map_err(fail)?;
        let y = tape.last();
        let values = [
            estimate_hinv(&p, &x, y, &b).map_err(fail)?.value,
            estimate_cg(&p, &x, y, &cg, &b).map_err(fail)?.value,
            estimate_ns(&p, &x, y, &ns, &b).map_err(fail)?.value,
            estimate_ad_tape(&p, &x, &tape, s, &Batch::Full).map_err(fail)?.value,
        ];
        for (errs, v) in by_kind.iter_mut().zip(values) {
            errs.push((v - &fd).norm());
        }
    }
    for (kind, errs) in EstimatorKind::ALL.iter().zip(&by_kind) {
        non_increasing(&format!("{kind} over S"), errs)?;
    }
    let tape = inner_loop(&p, &x, &y0, 40, eta_y, MapMode::Exponential, || Batch::Full).map_err(fail)?;
    let (mut cg_errs, mut ns_errs) = (Vec::new(), Vec::new());
    for t in [5, 10, 20, 50] {
        let cg_t = TscgConfig {
            max_iters: t,
            residual_tol: 1e-14,
            warm_start: None,
        };
        let ns_t = EstimatorConfig { ns_t: t, ..ns.clone() };
        cg_errs.push((estimate_cg(&p, &x, tape.last(), &cg_t, &b).map_err(fail)?.value - &fd).norm());
        ns_errs.push((estimate_ns(&p, &x, tape.last(), &ns_t, &b).map_err(fail)?.value - &fd).norm());
    }
    non_increasing("cg over T", &cg_errs)?;
    non_increasing("ns over T", &ns_errs)?;
    let mut lines: Vec<String> = EstimatorKind::ALL
        .iter()
        .zip(&by_kind)
        .map(|(k, e)| format!("{k} over S: {}", list(e)))
        .collect();
    lines.push(format!("cg over T: {}", list(&cg_errs)));
    lines.push(format!("ns over T: {}", list(&ns_errs)));
    Ok(lines)
}

fn figure_setup(spd: Spd) -> Result<(SyntheticStiefelSpd, Mat, Mat), String> {
    let mut r = rng(42);
    let (x, y) = SyntheticStiefelSpd::generate_data(100, 50, 20, &mut r);
    let p = SyntheticStiefelSpd::with_lower(&x, &y, 0.01, spd).map_err(fail)?;
    let x0 = p.upper().rand_point(&mut r);
    let y0 = p.lower().rand_point(&mut r);
    Ok((p, x0, y0))
}

fn figure_config(kind: EstimatorKind) -> SolverConfig {
    SolverConfig {
        eta_x: 0.5,
        eta_y: 0.5,
        inner_steps: 50,
        outer_iters: 200,
        estimator: EstimatorConfig {
            cg: TscgConfig {
                max_iters: 50,
                residual_tol: 1e-10,
                warm_start: None,
            },
            ns_t: 50,
            ns_gamma: 1.0,
            ad_s: 50,
            ad_eta_y: 0.5,
            ..EstimatorConfig::new(kind)
        },
        record_reference_error: true,
        record_every: 1,
        ..SolverConfig::default()
    }
}

fn estimator_comparison() -> Check {
    let (p, x0, y0) = figure_setup(Spd::new(50))?;
    let mut medians = Vec::new();
    let mut lines = Vec::new();
    for kind in EstimatorKind::ALL {
        let trace = rhgd(&p, &figure_config(kind), &x0, &y0).map_err(fail)?;
        let obj = trace.objectives();
        ensure(obj.iter().all(|v| v.is_finite()), format!("{kind}: non-finite objective"))?;
        let (first, last) = (obj[0], obj[obj.len() - 1]);
        let head: f64 = obj[..50].iter().sum::<f64>() / 50.0;
        let tail: f64 = obj[obj.len() - 50..].iter().sum::<f64>() / 50.0;
        ensure(last < first && tail < head, format!("{kind}: objective {first:.4e} -> {last:.4e}"))?;
        let errs: Vec<f64> = trace.records[trace.len() - 50..].iter().filter_map(|r| r.est_err).collect();
        let med = median(errs);
        lines.push(format!("{kind}: F {first:.4e} -> {last:.4e}, median err (last 50) {med:.3e}"));
        medians.push(med);
    }
    let (hinv, ns, ad) = (medians[0], medians[2], medians[3]);
    ensure(hinv <= ns, format!("hinv {hinv:e} > ns {ns:e}"))?;
    ensure(hinv <= ad, format!("hinv {hinv:e} > ad {ad:e}"))?;
    Ok(lines)
}

fn stochastic_coherence() -> Check {
    let mut r = rng(1);
    let data = HyperRepData::generate(20, 20, 10, 3, &mut r).map_err(fail)?;
    let p = HyperRep::new(data, 3, 0.1).map_err(fail)?;
    let x0 = p.upper().rand_point(&mut r);
    let y0 = p.lower().rand_point(&mut r);
    let base = SolverConfig {
        eta_x: 0.02,
        eta_y: 0.05,
        inner_steps: 20,
        outer_iters: 100,
        estimator: EstimatorConfig::new(EstimatorKind::Hinv),
        ..SolverConfig::default()
    };
    let det = rhgd(&p, &base, &x0, &y0).map_err(fail)?;
    let enumerated = SolverConfig {
        batch_sizes: Some(BatchSizes {
            b1: 20,
            b2: 20,
            b3: 20,
            b4: 20,
        }),
        ..base.clone()
    };
    let sto = rshgd(&p, &enumerated, &x0, &y0).map_err(fail)?;
    let bits = |t: &Trace| t.objectives().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    ensure(bits(&det) == bits(&sto), "full-batch stochastic trace differs from deterministic trace")?;
    let (mut initial, mut fin) = (Vec::new(), Vec::new());
    for seed in 0..5 {
        let cfg = SolverConfig {
            seed,
            outer_iters: 2000,
            batch_sizes: Some(BatchSizes {
                b1: 5,
                b2: 5,
                b3: 5,
                b4: 5,
            }),
            ..base.clone()
        };
        let obj = rshgd(&p, &cfg, &x0, &y0).map_err(fail)?.objectives();
        initial.push(obj[0]);
        fin.push(obj[obj.len() - 1]);
    }
    let (mi, mf) = (median(initial), median(fin));
    ensure(mf <= 0.5 * mi, format!("median loss {mi:.4} -> {mf:.4}"))?;
    Ok(vec![
        format!("bitwise-equal objective sequences over {} iterations", det.len()),
        format!("median upper loss over 5 seeds {mi:.4} -> {mf:.4} ({:.0}%)", 100.0 * mf / mi),
    ])
}

/// `f(X) = ⟨C, X⟩ + ⅓ Σ X_ij³`.
fn cubic_hessian_symmetry(m: &dyn Manifold, seed: u64) -> f64 {
    let mut r = rng(seed);
    let (rows, cols) = m.ambient_shape();
    let mut c = gaussian(rows, cols, &mut r);
    if rows == cols {
        c = sym(&c);
    }
    let x = m.rand_point(&mut r);
    let u = m.rand_tangent(&x, &mut r);
    let v = m.rand_tangent(&x, &mut r);
    let g = &c + x.component_mul(&x);
    let hu = m.ehess_to_rhess(&x, &g, &(x.component_mul(&u) * 2.0), &u).unwrap();
    let hv = m.ehess_to_rhess(&x, &g, &(x.component_mul(&v) * 2.0), &v).unwrap();
    let (a, b) = (m.inner(&x, &hu, &v), m.inner(&x, &u, &hv));
    (a - b).abs() / (1.0 + a.abs().max(b.abs()))
}

fn geometry_suites() -> Check {
    let with_exp: Vec<Box<dyn Manifold>> = vec![
        Box::new(Euclidean::new(3, 2)),
        Box::new(Spd::new(4)),
        Box::new(DoublyStochastic::uniform(3, 4).map_err(fail)?),
    ];
    let (mut roundtrip, mut isometry, mut hess): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for seed in 0..20 {
        for m in &with_exp {
            let mut r = rng(seed);
            let x = m.rand_point(&mut r);
            let u = m.rand_tangent(&x, &mut r) * 0.1;
            let y = m.exp(&x, &u).map_err(fail)?;
            let back = m.log(&x, &y).map_err(fail)?;
            roundtrip = roundtrip.max(m.norm(&x, &(&back - &u)) / (1.0 + m.norm(&x, &u)));
            let (a, b) = (m.rand_tangent(&x, &mut r), m.rand_tangent(&x, &mut r));
            let (ta, tb) = (m.transport(&x, &y, &a).map_err(fail)?, m.transport(&x, &y, &b).map_err(fail)?);
            let before = m.inner(&x, &a, &b);
            isometry = isometry.max((m.inner(&y, &ta, &tb) - before).abs() / (1.0 + before.abs()));
        }
    }
    let all: Vec<Box<dyn Manifold>> = vec![
        Box::new(Euclidean::new(3, 2)),
        Box::new(Spd::new(4)),
        Box::new(Stiefel::new(5, 2).map_err(fail)?),
        Box::new(DoublyStochastic::uniform(3, 4).map_err(fail)?),
    ];
    for seed in 0..100 {
        for m in &all {
            hess = hess.max(cubic_hessian_symmetry(m.as_ref(), seed));
        }
    }
    let spd50 = Spd::new(50);
    let mut r = rng(7);
    let x = spd50.rand_point(&mut r);
    let u = spd50.rand_tangent(&x, &mut r) * 2.0;
    let far = spd50.log(&x, &spd50.exp(&x, &u).map_err(fail)?).map_err(fail)?;
    let far_err = spd50.norm(&x, &(far - &u)) / 2.0;

    let mut lyap: f64 = 0.0;
    for n in [2, 5, 20] {
        for seed in 0..100 {
            let mut r = rng(seed);
            let q = nalgebra::linalg::QR::new(gaussian(n, n, &mut r)).q();
            let eigs = Vector::from_fn(n, |i, _| 10f64.powf(-3.0 + 6.0 * i as f64 / (n - 1) as f64));
            let a = sym(&(&q * Mat::from_diagonal(&eigs) * q.transpose()));
            let c = sym(&gaussian(n, n, &mut r));
            let g = lyapunov_solve(&a, &c).map_err(fail)?;
            lyap = lyap.max((&g * &a + &a * &g - &c).norm() / c.norm());
        }
    }
    let mut r = rng(3);
    let k = gaussian(50, 50, &mut r).map(|v| (v * 0.5).exp());
    let marg = Vector::from_element(50, 1.0 / 50.0);
    let sk = sinkhorn(&k, &marg, &marg, 1e-10, 10_000).map_err(fail)?;
    let sk_res = marginal_residual(&sk.plan, &marg, &marg);

    let ds = DoublyStochastic::uniform(3, 4).map_err(fail)?;
    let spd2 = Spd::new(4).with_retraction(SpdRetraction::SecondOrder);
    let mut ratio_spread: f64 = 0.0;
    let mut spd_bound: f64 = 0.0;
    for seed in 0..5 {
        let mut r = rng(seed);
        let x = ds.rand_point(&mut r);
        let u = ds.rand_tangent(&x, &mut r) * 0.5;
        let ratios: Vec<f64> = [1e-1, 1e-2, 1e-3]
            .iter()
            .map(|&t| {
                let a = ds.retract(&x, &(&u * t)).unwrap();
                let b = ds.exp(&x, &(&u * t)).unwrap();
                ds.dist(&b, &a).unwrap() / (t * t)
            })
            .collect();
        let hi = ratios.iter().cloned().fold(0.0, f64::max);
        let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        ratio_spread = ratio_spread.max(hi / lo);
        let x = spd2.rand_point(&mut r);
        let u = spd2.rand_tangent(&x, &mut r);
        for t in [1e-1, 1e-2, 1e-3] {
            let a = spd2.retract(&x, &(&u * t)).map_err(fail)?;
            let b = spd2.exp(&x, &(&u * t)).map_err(fail)?;
            spd_bound = spd_bound.max(spd2.dist(&b, &a).map_err(fail)? / (t * t));
        }
    }
    ensure(roundtrip <= 1e-7, format!("exp/log round trip {roundtrip:e}"))?;
    ensure(far_err <= 1e-7, format!("SPD(50) round trip at distance 2: {far_err:e}"))?;
    ensure(isometry <= 1e-8, format!("transport isometry {isometry:e}"))?;
    ensure(hess <= 1e-7, format!("Hessian symmetry {hess:e}"))?;
    ensure(lyap <= 1e-10, format!("Lyapunov residual {lyap:e}"))?;
    ensure(sk_res <= 1e-10, format!("Sinkhorn marginals {sk_res:e}"))?;
    ensure(ratio_spread <= 10.0, format!("retraction ratio spread {ratio_spread}"))?;
    ensure(spd_bound < 1.0, format!("second-order SPD retraction ratio {spd_bound}"))?;
    Ok(vec![
        format!("round trip {roundtrip:.1e} (SPD(50) at distance 2: {far_err:.1e}), transport {isometry:.1e}"),
        format!("Hessian symmetry {hess:.1e}, Lyapunov {lyap:.1e}, Sinkhorn {sk_res:.1e}"),
        format!("retraction ratio spread {ratio_spread:.2}x, SPD second-order ratio <= {spd_bound:.2e}"),
    ])
}

fn retraction_mode() -> Check {
    let spd = Spd::new(50).with_retraction(SpdRetraction::SecondOrder);
    let (p, x0, y0) = figure_setup(spd)?;
    let mut mins = Vec::new();
    for mode in [MapMode::Exponential, MapMode::Retraction] {
        let cfg = SolverConfig {
            map_mode: mode,
            record_reference_error: false,
            ..figure_config(EstimatorKind::Hinv)
        };
        let trace = rhgd(&p, &cfg, &x0, &y0).map_err(fail)?;
        p.lower().check_point(&trace.final_y).map_err(fail)?;
        p.upper().check_point(&trace.final_x).map_err(fail)?;
        mins.push(trace.min_sq_hypergrad());
    }
    let (exp, retr) = (mins[0], mins[1]);
    ensure(retr <= 2.0 * exp, format!("retraction {retr:e} vs exponential {exp:e}"))?;
    Ok(vec![format!("min |G F|^2: exponential {exp:.4e}, retraction {retr:.4e}")])
}

fn minmax() -> Check {
    let saddle = BilinearSaddle::new(dmatrix![1.0; 0.0]).map_err(fail)?;
    let p = MinMax::new(saddle);
    let cfg = SolverConfig {
        eta_x: 0.1,
        eta_y: 0.1,
        inner_steps: 10,
        outer_iters: 500,
        ..SolverConfig::default()
    };
    let trace = rhgd_minmax(&p, &cfg, &Mat::zeros(2, 1), &Mat::zeros(2, 1)).map_err(fail)?;
    let grad = p.saddle().value_gradient(&trace.final_x).norm();
    ensure(grad <= 1e-6, format!("|grad F(x_K)| = {grad:e}"))?;
    let x = trace.final_x.clone();
    let y = p.lower_solution(&x).unwrap().map_err(fail)?;
    let b = EstimatorBatches::full();
    let fast = p.grad_x_f(&x, &y, &Batch::Full).map_err(fail)?;
    let full = estimate_hinv(&p, &x, &y, &b).map_err(fail)?.value;
    let gap = (&fast - &full).norm();
    ensure(gap <= 1e-8, format!("fast path differs from hinv by {gap:e}"))?;
    let dispatch = estimate(&p, &x, &y, &EstimatorConfig::new(EstimatorKind::Hinv), &b, None).map_err(fail)?;
    ensure(dispatch.value == full, "dispatch differs from direct inverse-Hessian estimate")?;
    Ok(vec![format!("|grad F(x_K)| = {grad:.1e}, |fast - hinv| = {gap:.1e}")])
}

fn ot_demo_sanity() -> Check {
    let cfg = ExperimentConfig {
        seed: 3,
        output_dir: None,
        repeats: 1,
        problem: ProblemConfig::Ot {
            n: 40,
            m: 40,
            d: 5,
            classes: 3,
            map_strength: 0.0,
            alpha: 1.0,
            lambda: 0.01,
        },
        solver: SolverSection {
            eta_x: 1.0,
            eta_y: 0.5,
            inner_steps: 5,
            outer_iters: 200,
            map_mode: MapMode::Retraction,
            estimator: rhgd::experiment::config::EstimatorSection {
                kind: EstimatorKind::Cg,
                ..Default::default()
            },
            ..SolverSection::default()
        },
    };
    let report = ot_demo(&cfg).map_err(fail)?;
    ensure(
        report.marginal_residual <= 1e-8,
        format!("marginal residual {:e}", report.marginal_residual),
    )?;
    ensure(report.metric_rel_err <= 1e-4, format!("metric error {:e}", report.metric_rel_err))?;
    ensure(report.label_accuracy == 1.0, format!("label accuracy {}", report.label_accuracy))?;
    Ok(vec![format!(
        "marginal residual {:.1e}, |M* - XtX|/|XtX| {:.1e}, 1-NN accuracy {:.0}%",
        report.marginal_residual,
        report.metric_rel_err,
        100.0 * report.label_accuracy
    )])
}

type Criterion = (&'static str, Duration, fn() -> Check);

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("1 quadratic oracle exactness", Duration::from_secs(1), quadratic_oracle),
        ("2 inverse Hessian vs finite differences", Duration::from_secs(10), hinv_vs_fd),
        ("3 error decay in S and T", Duration::from_secs(60), error_decay),
        ("4 estimator comparison", Duration::from_secs(300), estimator_comparison),
        ("5 stochastic/deterministic coherence", Duration::from_secs(120), stochastic_coherence),
        ("6 geometry suites", Duration::from_secs(30), geometry_suites),
        ("7 retraction mode", Duration::from_secs(300), retraction_mode),
        ("8 min-max reduction", Duration::from_secs(5), minmax),
        ("9 transport demo", Duration::from_secs(60), ot_demo_sanity),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, limit, check) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = check();
        let elapsed = start.elapsed();
        let in_time = elapsed <= limit;
        let status = match (&outcome, in_time) {
            (Ok(_), true) => "PASS",
            _ => "FAIL",
        };
        if status == "FAIL" {
            failed += 1;
        }
        println!(
            "criterion {name}: {status} ({:.2}s, limit {}s)",
            elapsed.as_secs_f64(),
            limit.as_secs()
        );
        match outcome {
            Ok(lines) => lines.iter().for_each(|l| println!("    {l}")),
            Err(e) => println!("    {e}"),
        }
        if !in_time {
            println!("    exceeded the time limit");
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
