//! Finite-control-set model predictive control for switched linear plants.
//!
//! The crate covers the whole workflow for a plant whose inputs are switch
//! positions `u ∈ {0,1}^m`:
//!
//! 1. build or load a plant and discretise it with a zero-order hold
//!    ([`model`]);
//! 2. enumerate the p-periodic steady states reachable with binary inputs
//!    and pick the one closest to an output reference ([`limit_cycle`]);
//! 3. synthesise a terminal weight that makes the tracking cost decrease
//!    along the closed loop ([`terminal_cost`]);
//! 4. run output-tracking or limit-cycle-tracking MPC with an exhaustive or
//!    a branch-and-bound solver ([`mpc`]) in closed loop and measure ripple,
//!    convergence and cost decrease ([`sim`]).
//!
//! [`cli`] wires these steps to JSON configuration files; the `fcs-mpc`
//! binary is a thin front end over it.

pub mod cli;
pub mod error;
pub mod limit_cycle;
pub mod model;
pub mod mpc;
pub mod numerics;
pub mod sim;
pub mod terminal_cost;

pub use error::{Error, Result};

/// Relative tolerance under which two optimisation costs count as equal.
///
/// Both the cycle search and the MPC solvers break such ties by enumeration
/// order. Plants like the two-stage amplifier have input pairs with identical
/// effect on the tracked output (`(0,0)` and `(1,1)` drive no differential
/// current), and without the tolerance rounding noise would pick between them.
pub const TIE_RELATIVE_TOLERANCE: f64 = 1e-9;
