//! Equilibrium measures for log-gases with an additional `x^theta` interaction.
//!
//! The crate covers the scalar problem, its vector reformulation with Nikishin
//! coupling on alternating half-lines, a closed-form oracle for point-mass data,
//! spectral-curve fitting and a Metropolis sampler for the particle model.

pub mod analytic;
pub mod cli;
pub mod config;
pub mod curve;
pub mod error;
pub mod measure;
pub mod qp;
pub mod quad;
pub mod sampler;
pub mod scalar;
pub mod theta;
pub mod vector;

pub use error::{Error, Result};
pub use theta::Theta;
