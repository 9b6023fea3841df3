//! Simulation and numerics for stochastic recurrence equations
//! `U_j = A_j U_{j-1} + B_j`, perpetuities and critical GARCH(1,1).

pub mod analytics;
pub mod error;
pub mod laws;
pub mod limitlab;
pub mod numeric;
pub mod par;
pub mod rng;
pub mod slowvary;
pub mod sre;
pub mod stats;

pub use error::{Error, Result};
