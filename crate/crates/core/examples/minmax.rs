//! Alternating descent-ascent on `f(x, y) = xᵀb + xᵀy − ½‖y‖²`, whose
//! min-max solution is `x* = −b`.

use nalgebra::dmatrix;

use rhgd::problem::{BilinearSaddle, MinMax};
use rhgd::solver::{rhgd_minmax, SolverConfig};

fn main() -> rhgd::Result<()> {
    let p = MinMax::new(BilinearSaddle::new(dmatrix![1.0; 0.0])?);
    let cfg = SolverConfig {
        eta_x: 0.1,
        eta_y: 0.1,
        inner_steps: 10,
        outer_iters: 500,
        ..SolverConfig::default()
    };
    let trace = rhgd_minmax(&p, &cfg, &dmatrix![0.5; 0.5], &dmatrix![0.0; 0.0])?;
    for r in trace.records.iter().step_by(100) {
        println!("k={:>3}  F={:>10.6}  |grad|={:.3e}", r.k, r.upper_obj, r.hypergrad_norm);
    }
    println!("x_K = {:?}", trace.final_x.as_slice());
    println!("|grad F(x_K)| = {:.3e}", p.saddle().value_gradient(&trace.final_x).norm());
    Ok(())
}
