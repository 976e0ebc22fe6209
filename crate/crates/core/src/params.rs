//! Model constants, versioned as a unit.
//!
//! Models I-III are the single avoided crossing, dual avoided crossing and
//! extended coupling with reflection models in their original
//! parameterisation. Model IV is the double arch geometry.

/// Bumped whenever any constant below changes; recorded in run metadata.
pub const MODEL_PARAMS_VERSION: &str = "tully-models/1";

pub mod sac {
    pub const A: f64 = 0.01;
    pub const B: f64 = 1.6;
    pub const C: f64 = 0.005;
    pub const D: f64 = 1.0;
}

pub mod dac {
    pub const A: f64 = 0.10;
    pub const B: f64 = 0.28;
    pub const C: f64 = 0.015;
    pub const D: f64 = 0.06;
    pub const E0: f64 = 0.05;
}

pub mod ecr {
    pub const A: f64 = 6.0e-4;
    pub const B: f64 = 0.10;
    pub const C: f64 = 0.90;
}

pub mod double_arch {
    pub const A: f64 = 6.0e-4;
    pub const B: f64 = 0.10;
    pub const C: f64 = 0.90;
    /// Half distance between the two arches (bohr).
    pub const Z: f64 = 10.0;
}

/// Wavepacket centroids used for each model.
pub fn default_r0(model: crate::ModelId) -> f64 {
    use crate::ModelId::*;
    match model {
        Tully1 => -20.0,
        Tully2 => -8.0,
        Tully3 => -15.0,
        Tully4 => -20.0,
    }
}

/// Low and high initial momenta studied for each model.
pub fn benchmark_momenta(model: crate::ModelId) -> [f64; 2] {
    use crate::ModelId::*;
    match model {
        Tully1 => [15.0, 25.0],
        Tully2 => [16.0, 30.0],
        Tully3 => [10.0, 30.0],
        Tully4 => [10.0, 40.0],
    }
}
