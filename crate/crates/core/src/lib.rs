//! Hybrid quantum lattice gas (Q-D1Q2 / Q-D2Q2) for Burgers-like equations.
//!
//! The crate is split along the data flow of an experiment:
//!
//! * [`kernel`]: the per-cell mathematics (collision unitary, state
//!   preparation and measurement, collision term, equilibria, transport
//!   coefficients).
//! * [`lattice`]: grids, population fields, collision + streaming steps.
//! * [`analytic`]: Cole-Hopf solution of the 1D Burgers equation for the
//!   cosine initial condition.
//! * [`fdm`]: explicit finite-difference reference solver for the
//!   macroscopic PDEs.
//! * [`experiments`]: estimators and sweep drivers.
//! * [`snapshot`]: CSV emission shared by every module.

pub mod analytic;
pub mod error;
pub mod experiments;
pub mod fdm;
pub mod kernel;
pub mod lattice;
pub mod snapshot;

pub use error::{QlgError, Result};
