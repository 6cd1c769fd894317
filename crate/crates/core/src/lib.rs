//! Numerical laboratory for the spherical Boltzmann machine.
//!
//! * [`spectral`]: semicircle bulk and its Stieltjes-type transforms.
//! * [`equilibrium`]: phase classification, order parameters, partition function, evidence.
//! * [`dmft`]: two-time dynamical mean-field solver, stationary states and thresholds.
//! * [`langevin`]: finite-N simulation of the coupled weight/chain dynamics.
//! * [`metrics`]: rank-one teacher–student divergences and tuning diagnostics.

pub mod dmft;
pub mod equilibrium;
pub mod error;
pub mod langevin;
pub mod metrics;
pub mod spectral;

pub use equilibrium::{DataSpectrum, EquilibriumSolution, Hyper, Phase};
pub use error::{Error, Result};
pub use spectral::SemicircleBulk;
