//! Frequency-domain simulation and control co-design optimization of farms of
//! heaving truncated-cylinder wave energy converters.
//!
//! The crate is organised bottom-up:
//!
//! * [`climate`]: JONSWAP spectra, regular waves, multi-year site climates.
//! * [`special`]: integer-order Bessel and Hankel functions.
//! * [`hydro`]: dispersion relation, single-body matched eigenfunction
//!   solution and array interaction backends with a coefficient cache.
//! * [`dynamics`]: farm equation of motion, power matrices and performance
//!   metrics.
//! * [`optimize`]: the constrained plant/control/layout problem, a genetic
//!   algorithm, a bounded simplex refiner and study presets.

pub mod climate;
pub mod dynamics;
pub mod error;
pub mod hydro;
pub mod optimize;
pub mod special;

pub use error::{Error, Result};

/// Water density (kg/m^3).
pub const RHO_WATER: f64 = 1025.0;
/// Gravitational acceleration (m/s^2).
pub const GRAVITY: f64 = 9.81;
