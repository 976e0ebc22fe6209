//! Tully model potentials and their adiabatic representation.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{dac, double_arch, ecr, sac};

/// Number of electronic states carried by every model.
pub const NSTATES: usize = 2;

/// Below this gap (hartree) the coupling vector is treated as singular.
pub const DEGENERACY_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelId {
    #[serde(rename = "tully1")]
    Tully1,
    #[serde(rename = "tully2")]
    Tully2,
    #[serde(rename = "tully3")]
    Tully3,
    #[serde(rename = "tully4")]
    Tully4,
}

impl ModelId {
    pub const ALL: [ModelId; 4] = [
        ModelId::Tully1,
        ModelId::Tully2,
        ModelId::Tully3,
        ModelId::Tully4,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelId::Tully1 => "tully1",
            ModelId::Tully2 => "tully2",
            ModelId::Tully3 => "tully3",
            ModelId::Tully4 => "tully4",
        }
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tully1" => Ok(ModelId::Tully1),
            "tully2" => Ok(ModelId::Tully2),
            "tully3" => Ok(ModelId::Tully3),
            "tully4" => Ok(ModelId::Tully4),
            other => Err(Error::config(format!("unknown model id {other:?}"))),
        }
    }
}

/// Real symmetric diabatic potential matrix and its position derivative.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct DiabaticMatrix {
    pub v11: f64,
    pub v22: f64,
    pub v12: f64,
    pub dv11: f64,
    pub dv22: f64,
    pub dv12: f64,
}

/// Diabatic potential of `model` at position `r` (bohr).
pub fn diabatic(model: ModelId, r: f64) -> DiabaticMatrix {
    match model {
        ModelId::Tully1 => single_avoided_crossing(r),
        ModelId::Tully2 => dual_avoided_crossing(r),
        ModelId::Tully3 => extended_coupling(r),
        ModelId::Tully4 => double_arch(r),
    }
}

fn single_avoided_crossing(r: f64) -> DiabaticMatrix {
    let e = (-sac::B * r.abs()).exp();
    let (v11, dv11) = if r >= 0.0 {
        (sac::A * (1.0 - e), sac::A * sac::B * e)
    } else {
        (-sac::A * (1.0 - e), sac::A * sac::B * e)
    };
    let g = (-sac::D * r * r).exp();
    DiabaticMatrix {
        v11,
        v22: -v11,
        v12: sac::C * g,
        dv11,
        dv22: -dv11,
        dv12: -2.0 * sac::C * sac::D * r * g,
    }
}

fn dual_avoided_crossing(r: f64) -> DiabaticMatrix {
    let a = (-dac::B * r * r).exp();
    let g = (-dac::D * r * r).exp();
    DiabaticMatrix {
        v11: 0.0,
        v22: -dac::A * a + dac::E0,
        v12: dac::C * g,
        dv11: 0.0,
        dv22: 2.0 * dac::A * dac::B * r * a,
        dv12: -2.0 * dac::C * dac::D * r * g,
    }
}

fn extended_coupling(r: f64) -> DiabaticMatrix {
    let (v12, dv12) = if r < 0.0 {
        let e = (ecr::C * r).exp();
        (ecr::B * e, ecr::B * ecr::C * e)
    } else {
        let e = (-ecr::C * r).exp();
        (ecr::B * (2.0 - e), ecr::B * ecr::C * e)
    };
    DiabaticMatrix {
        v11: ecr::A,
        v22: -ecr::A,
        v12,
        dv11: 0.0,
        dv22: 0.0,
        dv12,
    }
}

fn double_arch(r: f64) -> DiabaticMatrix {
    let (b, c, z) = (double_arch::B, double_arch::C, double_arch::Z);
    let (v12, dv12) = if r < -z {
        let (p, q) = ((c * (r - z)).exp(), (c * (r + z)).exp());
        (b * (q - p), b * c * (q - p))
    } else if r > z {
        let (p, q) = ((-c * (r - z)).exp(), (-c * (r + z)).exp());
        (b * (p - q), -b * c * (p - q))
    } else {
        let (p, q) = ((c * (r - z)).exp(), (-c * (r + z)).exp());
        (b * (2.0 - p - q), b * c * (q - p))
    };
    DiabaticMatrix {
        v11: double_arch::A,
        v22: -double_arch::A,
        v12,
        dv11: 0.0,
        dv22: 0.0,
        dv12,
    }
}

/// Electronic-structure snapshot at one nuclear position.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdiabaticData {
    /// Adiabatic energies, ascending.
    pub e: [f64; NSTATES],
    pub grad_e: [f64; NSTATES],
    /// `nacv[m][l] = <phi_m | d/dR phi_l>`, antisymmetric.
    pub nacv: [[f64; NSTATES]; NSTATES],
    /// `basis[m]` is adiabatic state m expressed in the diabatic basis.
    pub basis: [[f64; NSTATES]; NSTATES],
}

impl AdiabaticData {
    pub fn gap(&self) -> f64 {
        self.e[1] - self.e[0]
    }
}

fn hellmann_feynman(d: &DiabaticMatrix, u: &[f64; 2], w: &[f64; 2]) -> f64 {
    u[0] * (d.dv11 * w[0] + d.dv12 * w[1]) + u[1] * (d.dv12 * w[0] + d.dv22 * w[1])
}

fn mixing_angle(d: &DiabaticMatrix) -> f64 {
    0.5 * (2.0 * d.v12).atan2(d.v11 - d.v22)
}

/// Diagonalises `d`.
///
/// The ground eigenvector has a non-negative first component and the
/// excited eigenvector is the ground one rotated by +90 degrees. Coupling
/// vectors come from the Hellmann-Feynman expression.
pub fn adiabatize(d: &DiabaticMatrix) -> Result<AdiabaticData> {
    let mean = 0.5 * (d.v11 + d.v22);
    let half_gap = (0.25 * (d.v11 - d.v22).powi(2) + d.v12 * d.v12).sqrt();
    let gap = 2.0 * half_gap;
    if gap < DEGENERACY_TOLERANCE {
        return Err(Error::Degenerate { r: f64::NAN, gap });
    }
    let theta = mixing_angle(d);
    let (s, c) = theta.sin_cos();
    let mut u0 = [-s, c];
    if u0[0] < 0.0 {
        u0 = [s, -c];
    }
    let u1 = [-u0[1], u0[0]];
    Ok(assemble(d, mean - half_gap, mean + half_gap, u0, u1))
}

/// Like [`adiabatize`], but flips eigenvector signs so that each adiabatic
/// state overlaps positively with the one in `reference`.
pub fn adiabatize_aligned(d: &DiabaticMatrix, reference: &AdiabaticData) -> Result<AdiabaticData> {
    let mut a = adiabatize(d)?;
    let mut flipped = false;
    for m in 0..NSTATES {
        let overlap = a.basis[m][0] * reference.basis[m][0] + a.basis[m][1] * reference.basis[m][1];
        if overlap < 0.0 {
            a.basis[m] = [-a.basis[m][0], -a.basis[m][1]];
            flipped = !flipped;
        }
    }
    if flipped {
        a.nacv[0][1] = -a.nacv[0][1];
        a.nacv[1][0] = -a.nacv[1][0];
    }
    Ok(a)
}

fn assemble(d: &DiabaticMatrix, e0: f64, e1: f64, u0: [f64; 2], u1: [f64; 2]) -> AdiabaticData {
    let d01 = hellmann_feynman(d, &u0, &u1) / (e1 - e0);
    AdiabaticData {
        e: [e0, e1],
        grad_e: [hellmann_feynman(d, &u0, &u0), hellmann_feynman(d, &u1, &u1)],
        nacv: [[0.0, d01], [-d01, 0.0]],
        basis: [u0, u1],
    }
}

/// Adiabatic data of `model` at `r`, with the position attached to any
/// degeneracy error.
pub fn adiabatic(model: ModelId, r: f64) -> Result<AdiabaticData> {
    adiabatize(&diabatic(model, r)).map_err(|e| with_position(e, r))
}

pub(crate) fn with_position(e: Error, r: f64) -> Error {
    match e {
        Error::Degenerate { gap, .. } => Error::Degenerate { r, gap },
        other => other,
    }
}

/// Coupling `d01` from the derivative of the mixing angle, in the gauge
/// chosen by [`adiabatize`]. Independent of the Hellmann-Feynman route.
pub fn nacv_from_mixing_angle(d: &DiabaticMatrix) -> f64 {
    let delta = 0.5 * (d.v11 - d.v22);
    let ddelta = 0.5 * (d.dv11 - d.dv22);
    let r2 = delta * delta + d.v12 * d.v12;
    let dtheta = (delta * d.dv12 - d.v12 * ddelta) / (2.0 * r2);
    // The ground vector (-sin, cos) is negated when sin > 0.
    if mixing_angle(d).sin() > 0.0 {
        -dtheta
    } else {
        dtheta
    }
}
