//! Semiclassical model of a transmon qubit read out through the bifurcation
//! of a nonlinear cavity–ancilla polariton.
//!
//! * [`model`]: bare circuit constants and the derived polariton parameters.
//! * [`steady`]: steady states of the driven system and their stability.
//! * [`dynamics`]: time-domain integration, hysteresis and bistability maps.
//! * [`readout`]: Monte-Carlo single-shot latching readout and fidelity.
//! * [`harness`]: configuration files, parameter sweeps and artifacts.

// `!(x > 0.0)` deliberately rejects NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod eom;
pub mod harness;
pub mod model;
pub mod readout;
pub mod steady;
pub mod units;

pub use model::{Polariton, PolaritonParams, QubitState, SystemParams};
pub use steady::{DriveSpec, SteadyStateBranch};
