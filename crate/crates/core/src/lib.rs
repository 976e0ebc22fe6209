//! Coupled-trajectory mixed quantum-classical (CTMQC) dynamics for
//! one-dimensional two-state models.
//!
//! The crate propagates a swarm of classical nuclear trajectories whose
//! electronic coefficients are coupled through a quantum momentum
//! reconstructed from the swarm itself. Three treatments of the quantum
//! momentum intercept are provided ([`qmom::QmVariant`]): the double
//! intercept, a rational regularisation and the Gaussian cut-off
//! procedure. Each can be combined with the energy-conserving redefinition
//! of the Born-Oppenheimer momentum ([`energy`]).
//!
//! A split-operator grid propagator ([`exact`]) supplies numerically exact
//! reference observables for the same models.

pub mod config;
pub mod diagnostics;
pub mod dynamics;
pub mod energy;
pub mod error;
pub mod exact;
pub mod model;
pub mod params;
pub mod qmom;
pub mod runner;
pub mod sampling;
pub mod units;

pub use config::{Method, RunConfig};
pub use error::{Error, Result};
pub use model::ModelId;
pub use qmom::QmVariant;
pub use runner::Simulation;

/// Version string written into run metadata.
pub const VERSION: &str = concat!("ctmqc ", env!("CARGO_PKG_VERSION"));
