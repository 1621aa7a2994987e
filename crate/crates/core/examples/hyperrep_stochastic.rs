//! Shallow hyper-representation on synthetic SPD data: full-batch versus
//! mini-batch hypergradient descent.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rhgd::hypergrad::{EstimatorConfig, EstimatorKind};
use rhgd::problem::{BatchSizes, BilevelProblem, HyperRep, HyperRepData};
use rhgd::solver::{rhgd, rshgd, SolverConfig};

fn main() -> rhgd::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let data = HyperRepData::generate(20, 20, 10, 3, &mut rng)?;
    let p = HyperRep::new(data, 3, 0.1)?;
    let x0 = p.upper().rand_point(&mut rng);
    let y0 = p.lower().rand_point(&mut rng);
    let base = SolverConfig {
        eta_x: 0.02,
        eta_y: 0.05,
        inner_steps: 20,
        outer_iters: 2000,
        estimator: EstimatorConfig::new(EstimatorKind::Hinv),
        ..SolverConfig::default()
    };
    let full = rhgd(&p, &base, &x0, &y0)?;
    let obj = full.objectives();
    println!("full batch: F0 = {:.4}, FK = {:.4}", obj[0], obj[obj.len() - 1]);
    for seed in 0..5 {
        let cfg = SolverConfig {
            seed,
            batch_sizes: Some(BatchSizes { b1: 5, b2: 5, b3: 5, b4: 5 }),
            ..base.clone()
        };
        let t = std::time::Instant::now();
        let tr = rshgd(&p, &cfg, &x0, &y0)?;
        let obj = tr.objectives();
        println!("seed {seed}: F0 = {:.4}, FK = {:.4} ({:.2}s)", obj[0], obj[obj.len() - 1], t.elapsed().as_secs_f64());
    }
    Ok(())
}
