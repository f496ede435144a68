//! Dyson Brownian motion on Jordan curves.
//!
//! Particles on a closed curve `Γ` interact through a logarithmic potential.
//! They are described by arc-length coordinates `x ∈ ℝ^N` (the parametrization
//! process). The crate provides:
//!
//! * [`curve`]: arc-length parametrizations of analytic Jordan curves,
//! * [`coulomb`]: energy, stationary density, drift and discriminant,
//! * [`sde`]: Euler–Maruyama integration of the parametrization process,
//! * [`gibbs`]: Metropolis sampling of the stationary Coulomb gas,
//! * [`fekete`]: the zero-temperature gradient flow, Fekete points and capacity,
//! * [`functionals`]: large-deviation rate functionals and hydrodynamic residuals,
//! * [`experiment`]: configuration files, persistence and diagnostics for the CLI.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coulomb;
pub mod curve;
pub mod diagnostics;
pub mod error;
pub mod experiment;
pub mod fekete;
pub mod quadrature;
pub mod functionals;
pub mod gibbs;
pub mod io;
pub mod polynomial;
pub mod sde;
pub mod stats;

pub use error::{Error, Result};
