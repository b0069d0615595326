//! Transmission upgrade planning under operational policies.

// Supplies the LAPACK routines behind the conic solver's PSD cones.
extern crate openblas_src;

pub mod bnb;
pub mod cli;
pub mod error;
pub mod io;
pub mod network;
pub mod operational;
pub mod policies;
pub mod power_flow;
pub mod relaxation;
mod serde_bounds;

pub use error::{Error, Result};

/// Absolute tolerance for constraint satisfaction checks, per-unit.
pub const FEAS_TOL: f64 = 1e-6;
