//! Energy-conserving redefinition of the BO momentum.

use crate::dynamics::Coeffs;
use crate::error::{Error, Result};
use crate::model::NSTATES;
use crate::qmom::QuantumMomentumField;
use crate::units::HBAR;

pub const DEFAULT_EKIN_CUTOFF: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct ModifiedBOMomentum {
    pub f_tilde: Vec<[f64; NSTATES]>,
    /// Kinetic energy below the cutoff; `f_tilde` holds the accumulated value.
    pub used_fallback: Vec<bool>,
}

impl ModifiedBOMomentum {
    pub fn fallback_fraction(&self) -> f64 {
        if self.used_fallback.is_empty() {
            return 0.0;
        }
        self.used_fallback.iter().filter(|&&b| b).count() as f64 / self.used_fallback.len() as f64
    }
}

/// `f~_m = (<f_m v + E_m> - E_m) / (2 E_kin) * M v`, falling back to `f_acc`
/// where the kinetic energy is below `ekin_cutoff`.
pub fn modified_bo_momentum(
    energies: &[[f64; NSTATES]],
    f_acc: &[[f64; NSTATES]],
    velocities: &[f64],
    mass: f64,
    ekin_cutoff: f64,
) -> ModifiedBOMomentum {
    let n = velocities.len();
    let mut target = [0.0; NSTATES];
    for beta in 0..n {
        for m in 0..NSTATES {
            target[m] += f_acc[beta][m] * velocities[beta] + energies[beta][m];
        }
    }
    for t in &mut target {
        *t /= n as f64;
    }
    let mut f_tilde = Vec::with_capacity(n);
    let mut used_fallback = Vec::with_capacity(n);
    for alpha in 0..n {
        let v = velocities[alpha];
        let ekin = 0.5 * mass * v * v;
        if ekin < ekin_cutoff {
            f_tilde.push(f_acc[alpha]);
            used_fallback.push(true);
            continue;
        }
        let mut f = [0.0; NSTATES];
        for m in 0..NSTATES {
            f[m] = (target[m] - energies[alpha][m]) / (2.0 * ekin) * mass * v;
        }
        f_tilde.push(f);
        used_fallback.push(false);
    }
    ModifiedBOMomentum { f_tilde, used_fallback }
}

/// Norm deviation below which [`renormalise`] leaves the coefficients alone.
pub const RENORM_TOLERANCE: f64 = 1e-12;

/// Normalises `c` in place and returns `ln(norm before / norm after)`.
/// A running sum of these plus the log of the current norm reproduces the
/// unnormalised norm without accumulating rounding.
pub fn renormalise(c: &mut Coeffs) -> Result<f64> {
    let norm: f64 = c.iter().map(|x| x.norm_sqr()).sum();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::ZeroNorm);
    }
    if (norm - 1.0).abs() <= RENORM_TOLERANCE {
        return Ok(0.0);
    }
    let s = norm.sqrt().recip();
    for x in c.iter_mut() {
        *x *= s;
    }
    let after: f64 = c.iter().map(|x| x.norm_sqr()).sum();
    Ok(((norm - after) / after).ln_1p())
}

/// Trajectory-averaged rate of energy change from the XF terms,
/// `< sum_{m != l} (P_ml / hbar M) |rho_ml|^2 df [df v + dE] >`.
pub fn xf_energy_rate(
    coeffs: &[Coeffs],
    energies: &[[f64; NSTATES]],
    f_eff: &[[f64; NSTATES]],
    velocities: &[f64],
    qm: &QuantumMomentumField,
    mass: f64,
) -> f64 {
    let n = coeffs.len();
    let mut sum = 0.0;
    for alpha in 0..n {
        let q = qm.pair_matrix(alpha);
        let c = &coeffs[alpha];
        for m in 0..NSTATES {
            for l in 0..NSTATES {
                if m == l {
                    continue;
                }
                let df = f_eff[alpha][m] - f_eff[alpha][l];
                let de = energies[alpha][m] - energies[alpha][l];
                let coh = c[m].norm_sqr() * c[l].norm_sqr();
                sum += q[m][l] / (HBAR * mass) * coh * df * (df * velocities[alpha] + de);
            }
        }
    }
    sum / n as f64
}
