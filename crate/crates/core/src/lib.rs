//! Simulation toolkit for neutral compartmental systems.
//!
//! The state of a compartment network is a history function on (-inf, 0].
//! Material moves between compartments through pipes with distributed
//! transit times (probability measures mu_ij), while in-compartment
//! production couples the *derivative* of the state to its own past
//! through a neutral kernel nu. The library represents the measures,
//! the histories, the neutral operator D and its convolution lift,
//! the compartment network itself, a fixed-step integrator with
//! per-step neutral recovery, graph analysis of the pipe network, and
//! long-run diagnostics (mass accounting, order preservation,
//! emptying, merging, recurrence).
//!
//! Everything is grid-based: one step `h` and one truncation horizon
//! `H` are shared by measures and histories, so delay atoms land
//! exactly on sample points and quadrature is trapezoidal throughout.

pub mod d_operator;
pub mod diagnostics;
pub mod error;
pub mod grid;
pub mod history;
pub mod integrator;
pub mod measures;
pub mod model;
pub mod scenario;
pub mod structure;

pub use error::{Error, Result};
pub use grid::Grid;
