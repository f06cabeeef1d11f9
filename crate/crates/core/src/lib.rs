//! Two-dimensional Coulomb gases in radial Hele-Shaw potentials.
//!
//! The core is generic over the scalar type (`f32` or `f64`); the aliases at
//! the crate root fix it to `f64`, which is what the statistics and the
//! command line use.

pub mod acceptance;
pub mod diagnostics;
pub mod estimator;
pub mod oracle;
pub mod potential;
pub mod sampler;
pub mod quadrature;
pub mod scalar;
pub mod thermal;

pub use num_complex::Complex;
pub use scalar::Real;

pub type Point = Complex<f64>;
pub type PotentialSpec = potential::PotentialSpec<f64>;
pub type PotentialParams = potential::PotentialParams<f64>;
pub type Droplet = potential::Droplet<f64>;
