//! Backstepping boundary control for 2-D reaction-diffusion equations.
//!
//! The crate synthesizes boundary feedback laws for
//!
//! ```text
//! u_t = ε Δu + λ u
//! ```
//!
//! on four geometries (a strip handled as a wavenumber ensemble, the unit
//! square, a circular sector, and a "piano" domain embedded in
//! an extended square), and verifies exponential decay of the closed loop by
//! Crank–Nicolson simulation.
//!
//! Module map:
//!
//! - [`specfun`]: the modified Bessel function `I₁` and friends.
//! - [`kernels`]: closed-form backstepping kernels and a finite-difference
//!   residual check against the kernel PDE.
//! - [`modal`]: sine-series and angular transforms.
//! - [`actuation`]: shape-function banks, the mode/actuator matrix `Φ`, its
//!   pseudoinverse, and minimal mode budgets.
//! - [`sim`]: grids, fields, Crank–Nicolson steppers and norms.
//! - [`control`]: every boundary feedback law, evaluated from the discrete state.
//! - [`experiments`]: scenarios, decay fitting and reports.

pub mod actuation;
pub mod control;
mod error;
pub mod experiments;
pub mod kernels;
pub mod modal;
pub mod sim;
pub mod specfun;

pub use error::{Error, Result};
