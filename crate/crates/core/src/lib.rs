//! Adversary lower bounds for quantum state-conversion control problems.
//!
//! The crate computes the bound as a semidefinite program, certifies it with a
//! dual solution, turns a feasible catalyst into an explicit sequence of
//! reduced density matrices, compiles that sequence into unitaries that act
//! on the free subsystems, and simulates the result.

pub mod adversary;
pub mod error;
pub mod linalg;
pub mod par;
pub mod problems;
pub mod sdp;
pub mod simulator;
pub mod synthesis;
pub mod tolerances;

pub use error::{Error, Result};
pub use tolerances::Tolerances;
