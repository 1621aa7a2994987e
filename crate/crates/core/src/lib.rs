//! Bilevel optimization over Riemannian manifolds.
//!
//! The crate provides matrix manifolds (Euclidean, SPD, Stiefel, doubly
//! stochastic), a [`problem::BilevelProblem`] contract with several concrete
//! instances, four hypergradient estimators and the outer-loop solvers, plus a
//! config-driven experiment harness used by the `rhgd` binary.

// NaN-rejecting comparisons.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiment;
pub mod geometry;
pub mod io;
pub mod hypergrad;
pub mod linalg;
pub mod manifolds;
pub mod problem;
pub mod solver;
pub mod tscg;

pub use error::{Error, Result};
