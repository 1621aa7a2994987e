//! Config-driven experiment harness behind the `rhgd` binary.

pub mod config;
pub mod check;
pub mod run;
pub mod sweep;
pub mod ot_demo;
