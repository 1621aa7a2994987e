//! Compares exponential-map and retraction updates on the synthetic problem.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rhgd::geometry::MapMode;
use rhgd::hypergrad::{EstimatorConfig, EstimatorKind};
use rhgd::manifolds::{Spd, SpdRetraction};
use rhgd::problem::{BilevelProblem, SyntheticStiefelSpd};
use rhgd::solver::{rhgd, SolverConfig};

fn main() -> rhgd::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (x, y) = SyntheticStiefelSpd::generate_data(100, 50, 20, &mut rng);
    let spd = Spd::new(50).with_retraction(SpdRetraction::SecondOrder);
    let p = SyntheticStiefelSpd::with_lower(&x, &y, 0.01, spd)?;
    let x0 = p.upper().rand_point(&mut rng);
    let y0 = p.lower().rand_point(&mut rng);
    for mode in [MapMode::Exponential, MapMode::Retraction] {
        let cfg = SolverConfig {
            inner_steps: 50,
            outer_iters: 200,
            map_mode: mode,
            estimator: EstimatorConfig::new(EstimatorKind::Hinv),
            ..SolverConfig::default()
        };
        let t = std::time::Instant::now();
        let trace = rhgd(&p, &cfg, &x0, &y0)?;
        println!(
            "{mode:?}: final F = {:.6e}, min |G F|^2 = {:.3e}, lower membership ok = {}, {:.2}s",
            trace.records.last().map_or(f64::NAN, |r| r.upper_obj),
            trace.min_sq_hypergrad(),
            p.lower().check_point(&trace.final_y).is_ok(),
            t.elapsed().as_secs_f64()
        );
    }
    Ok(())
}
