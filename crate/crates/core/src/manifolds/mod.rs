//! Concrete manifolds.

mod doubly_stochastic;
mod euclidean;
mod spd;
mod stiefel;

pub use doubly_stochastic::DoublyStochastic;
pub use euclidean::Euclidean;
pub use spd::{Spd, SpdRetraction};
pub use stiefel::Stiefel;

use crate::error::{Error, Result};
use crate::linalg::Mat;

fn check_shape(what: &str, a: &Mat, shape: (usize, usize)) -> Result<()> {
    if a.shape() != shape {
        return Err(Error::contract(format!(
            "{what} has shape {:?}, expected {:?}",
            a.shape(),
            shape
        )));
    }
    Ok(())
}
