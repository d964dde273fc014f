//! Dephasing dynamics of polarization-encoded photons.
//!
//! The crate turns a frequency distribution into decoherence functions,
//! builds the exact dynamical map on generalized Bloch vectors, extracts the
//! time-local generator together with its decay rates and jump operators,
//! integrates the resulting master equation and decomposes correlated
//! system-environment states into bath-positive terms.

pub mod basis;
pub mod bplus;
pub mod channel;
pub mod decoherence;
pub mod error;
pub mod exec;
pub mod export;
pub mod generator;
pub mod integrator;
pub mod quadrature;
pub mod states;
pub mod tolerance;
pub mod verify;

use nalgebra::DMatrix;
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;
pub type RMatrix = DMatrix<f64>;

pub use error::{Error, Result};
pub use exec::Execution;
pub use tolerance::Tolerances;
