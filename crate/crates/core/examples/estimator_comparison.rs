//! Runs deterministic hypergradient descent on the synthetic Stiefel × SPD
//! problem with each estimator and prints objective and estimation error.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rhgd::hypergrad::{EstimatorConfig, EstimatorKind};
use rhgd::problem::{BilevelProblem, SyntheticStiefelSpd};
use rhgd::solver::{rhgd, SolverConfig};

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn main() -> rhgd::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let p = SyntheticStiefelSpd::generate(100, 50, 20, 0.01, &mut rng)?;
    let x0 = p.upper().rand_point(&mut rng);
    let y0 = p.lower().rand_point(&mut rng);
    println!("{:>5} {:>14} {:>14} {:>14} {:>8}", "est", "F(x_0)", "F(x_K)", "median err", "secs");
    for kind in EstimatorKind::ALL {
        let cfg = SolverConfig {
            eta_x: 0.5,
            eta_y: 0.5,
            inner_steps: 50,
            outer_iters: 200,
            estimator: EstimatorConfig {
                ns_t: 50,
                ns_gamma: 1.0,
                ad_s: 50,
                ad_eta_y: 0.5,
                ..EstimatorConfig::new(kind)
            },
            record_reference_error: true,
            record_every: 1,
            ..SolverConfig::default()
        };
        let t = std::time::Instant::now();
        let trace = rhgd(&p, &cfg, &x0, &y0)?;
        let errs: Vec<f64> = trace.records[trace.len() - 50..].iter().filter_map(|r| r.est_err).collect();
        let obj = trace.objectives();
        println!(
            "{:>5} {:>14.6e} {:>14.6e} {:>14.3e} {:>8.2}",
            kind.label(),
            obj[0],
            obj[obj.len() - 1],
            median(errs),
            t.elapsed().as_secs_f64()
        );
    }
    Ok(())
}
