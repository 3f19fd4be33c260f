//! Numerical companion to the counterexample to the Bernstein problem in
//! dimension nine: the foliation of one side of the Simons cone, barrier
//! construction, the minimal surface equation solver and the cone stability
//! and special Lagrangian side checks.

mod error;
pub(crate) mod numerics;

pub mod foliation;
pub mod perturbed_leaf;
pub mod barriers;
pub mod mse_solver;
pub mod cone_stability;
pub mod lagrangian;
pub mod mss2d;
pub mod lawson_osserman;
pub mod plot;
pub mod report;

pub use error::{Error, IntegrationState, Result};
