//! Time-domain solver for high-frequency Helmholtz scattering.
//!
//! A compactly supported plane wavelet is propagated with an explicit
//! spectral-element scheme on meshes that follow the wave front, and the
//! time-harmonic field is recovered with an incremental Fourier transform.

pub mod adapt;
pub mod cli;
pub mod config;
pub mod driver;
pub mod error;
pub mod export;
pub mod femspace;
pub mod fourier;
pub mod hierarchy;
pub mod problem;
pub mod stepper;

pub use error::{Error, Result};
