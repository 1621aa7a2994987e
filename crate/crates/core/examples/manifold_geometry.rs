//! Exponential and logarithm round trips, retraction error and vector
//! transport on each manifold.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rhgd::geometry::Manifold;
use rhgd::manifolds::{DoublyStochastic, Euclidean, Spd, SpdRetraction, Stiefel};

fn report(m: &dyn Manifold, rng: &mut ChaCha8Rng) -> rhgd::Result<()> {
    let x = m.rand_point(rng);
    let u = m.rand_tangent(&x, rng) * 0.3;
    let y = m.exp_or_retract(&x, &u)?;
    let moved = m.vector_transport(&x, &y, &u)?;
    print!("{:<22} dim {:>3}  transported norm change {:+.1e}", m.id(), m.dim(), m.norm(&y, &moved) - m.norm(&x, &u));
    if m.has_exp() {
        let back = m.log(&x, &y)?;
        let gap = |t: f64| -> rhgd::Result<f64> {
            let e = m.exp(&x, &(&u * t))?;
            let r = m.retract(&x, &(&u * t))?;
            Ok((e - r).norm() / (t * t))
        };
        print!(
            "  |log(exp u) - u| {:.1e}  retraction gap/t² {:.2e} (t=1e-2) {:.2e} (t=1e-3)",
            (back - &u).norm(),
            gap(1e-2)?,
            gap(1e-3)?
        );
    } else {
        print!("  retraction only");
    }
    println!();
    Ok(())
}

fn main() -> rhgd::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    report(&Euclidean::new(3, 2), &mut rng)?;
    report(&Spd::new(4), &mut rng)?;
    report(&Spd::new(4).with_retraction(SpdRetraction::SecondOrder), &mut rng)?;
    report(&Stiefel::new(5, 2)?, &mut rng)?;
    report(&DoublyStochastic::uniform(4, 5)?, &mut rng)?;
    Ok(())
}
