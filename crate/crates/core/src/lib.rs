//! Simulation and analysis of adaptive absorption: a field mode is coupled to
//! a continuously monitored absorber and the coupling is switched off at the
//! first detected photon, removing exactly one photon from the mode.
//!
//! Modules:
//!
//! * [`fock`]: truncated single-mode density matrices and photon statistics.
//! * [`dynamics`]: jump/no-jump superoperators and the unconditional loss channel.
//! * [`adaptive`]: evolution with feedback switch-off, stochastic trajectories.
//! * [`analytic`]: closed-form results for coherent and number-state inputs.
//! * [`inference`]: photon-number posteriors from the first detection time.
//! * [`cascade`]: a discrete chain of weak beam splitters with feedback.

pub mod adaptive;
pub mod analytic;
pub mod cascade;
pub mod dynamics;
pub mod error;
pub mod fock;
pub mod inference;
pub mod quadrature;
pub mod stats;

pub use error::{Error, Result};
pub use fock::{AbsorberParams, FockDensityMatrix, Moments, PhotonNumberDistribution};
pub use num_complex::Complex64;
