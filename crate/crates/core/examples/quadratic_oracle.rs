//! Every estimator on the Euclidean quadratic oracle `f = ½‖y‖²`, `g = ½‖y − Ax‖²`,
//! whose hypergradient `AᵀAx` is known in closed form.

use nalgebra::dmatrix;

use rhgd::geometry::MapMode;
use rhgd::hypergrad::{estimate, estimate_ad, EstimatorConfig, EstimatorKind};
use rhgd::problem::{BilevelProblem, EstimatorBatches, QuadraticOracle};
use rhgd::solver::{rhgd, SolverConfig};

fn main() -> rhgd::Result<()> {
    let p = QuadraticOracle::new(dmatrix![2.0, 0.0; 0.0, 1.0])?;
    let x = dmatrix![1.0; 1.0];
    let y = p.lower_solution(&x).expect("closed form")?;
    let truth = p.exact_hypergradient(&x);
    println!("exact hypergradient: {:?}", truth.as_slice());
    for kind in EstimatorKind::ALL {
        let cfg = EstimatorConfig {
            ns_gamma: 0.4,
            ad_s: 200,
            ..EstimatorConfig::new(kind)
        };
        let est = match kind {
            EstimatorKind::Ad => estimate_ad(&p, &x, &dmatrix![0.0; 0.0], &cfg, MapMode::Exponential)?.0,
            _ => estimate(&p, &x, &y, &cfg, &EstimatorBatches::full(), None)?,
        };
        println!("{:>5}: error {:.3e}", kind.label(), (est.value - &truth).norm());
    }
    let cfg = SolverConfig {
        eta_x: 0.1,
        eta_y: 0.5,
        inner_steps: 50,
        outer_iters: 200,
        ..SolverConfig::default()
    };
    let trace = rhgd(&p, &cfg, &x, &dmatrix![0.0; 0.0])?;
    let last = trace.records.last().expect("nonempty trace");
    println!("after {} outer steps: |hypergradient| = {:.3e}", trace.len(), last.hypergrad_norm);
    Ok(())
}
