//! Plasma-sheath boundary layers for the isothermal Euler-Poisson system
//! with Boltzmann electrons on the half-line `x > 0`.
//!
//! The crate provides
//! - [`profiles`]: the nonlinear sheath ODE and its linear correctors,
//! - [`euler_limit`]: the quasineutral (isothermal Euler) limit solver,
//! - [`euler_poisson`]: the full ε-dependent Euler-Poisson solver,
//! - [`expansion`]: the two-scale approximate solution and its residual,
//! - [`diagnostics`]: norms, relative entropy, rate fits and the ε-sweep,
//! - [`config`]: the `key = value` run configuration.

pub mod config;
pub mod diagnostics;
pub mod error;
pub mod euler_limit;
pub mod euler_poisson;
pub mod expansion;
pub mod grid;
pub mod io;
pub mod numerics;
pub mod profiles;

pub use error::{Result, SheathError};
pub use grid::Grid1D;
