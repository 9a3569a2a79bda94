//! District-scale thermo-radiative simulation engine.
//!
//! Couples transient 1D heat conduction through building walls and ground
//! soil columns, long-wave radiative exchange solved with the radiosity
//! method (inside building zones and over the outdoor scene with sky), and
//! zone air energy balances. The sub-models are advanced together with an
//! implicit time scheme and nested fixed-point iterations so that boundary
//! fluxes and surface temperatures are mutually consistent at the end of
//! every time step.
//!
//! Module map:
//! - [`geometry`]: triangle scene mesh, polygon-to-polygon view factors,
//!   sky view factors, occlusion.
//! - [`conduction`]: multilayer 1D slabs, implicit Euler stepping in
//!   dimensionless form.
//! - [`longwave`]: radiosity solves and net long-wave fluxes.
//! - [`airzone`]: zone air energy balance.
//! - [`engine`]: time loop and the nested fixed-point coupling.
//! - [`io`]: scene/weather/results files and the exterior film-coefficient
//!   correlation.
//! - [`verify`]: error norms, the sinusoidal verification case with its
//!   fine-discretization reference, convergence-order estimation, and local
//!   sensitivity analysis.

pub mod airzone;
pub mod conduction;
pub mod engine;
pub mod error;
pub mod geometry;
pub mod io;
pub mod longwave;
pub mod verify;

pub use error::{Error, Result};

/// Stefan-Boltzmann constant [W m^-2 K^-4].
pub const STEFAN_BOLTZMANN: f64 = 5.67e-8;

/// Absolute zero offset between Celsius and Kelvin.
pub const KELVIN_OFFSET: f64 = 273.15;

/// Convert Celsius to Kelvin.
#[inline]
pub fn celsius_to_kelvin(c: f64) -> f64 {
    c + KELVIN_OFFSET
}

/// Convert Kelvin to Celsius.
#[inline]
pub fn kelvin_to_celsius(k: f64) -> f64 {
    k - KELVIN_OFFSET
}
