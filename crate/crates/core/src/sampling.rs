//! Wigner sampling of the initial Gaussian nuclear wavepacket.

use std::f64::consts::{PI, SQRT_2};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::NSTATES;
use crate::units::HBAR;

/// Gaussian wavepacket `(pi S^2)^(-1/4) exp(-(R-R0)^2 / 2S^2 + i k0 (R-R0))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WavepacketSpec {
    pub r0: f64,
    pub k0: f64,
    pub sigma_packet: f64,
}

impl WavepacketSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_packet > 0.0 && self.sigma_packet.is_finite()) {
            return Err(Error::config("sigma_packet_bohr must be positive"));
        }
        if !self.r0.is_finite() || !self.k0.is_finite() {
            return Err(Error::config("wavepacket centroid must be finite"));
        }
        Ok(())
    }

    /// Standard deviation of the position marginal of the Wigner function.
    pub fn position_std(&self) -> f64 {
        self.sigma_packet / SQRT_2
    }

    /// Standard deviation of the momentum marginal of the Wigner function.
    pub fn momentum_std(&self) -> f64 {
        HBAR / (self.sigma_packet * SQRT_2)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InitialEnsemble {
    pub positions: Vec<f64>,
    pub momenta: Vec<f64>,
    pub seed: u64,
    pub coefficients: Vec<[Complex64; NSTATES]>,
}

impl InitialEnsemble {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

/// Draws `n_traj` phase-space points from the Wigner function of `spec`.
///
/// Each trajectory consumes one Box-Muller pair from a ChaCha stream, the
/// cosine branch for the position and the sine branch for the momentum, so
/// an ensemble of size n is a prefix of any larger ensemble with the same
/// seed. All trajectories start in the ground adiabatic state.
pub fn sample_wigner(spec: &WavepacketSpec, n_traj: usize, seed: u64) -> Result<InitialEnsemble> {
    spec.validate()?;
    if n_traj == 0 {
        return Err(Error::config("n_traj must be at least 1"));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let (sr, sp) = (spec.position_std(), spec.momentum_std());
    let mut positions = Vec::with_capacity(n_traj);
    let mut momenta = Vec::with_capacity(n_traj);
    for _ in 0..n_traj {
        let (z0, z1) = box_muller(&mut rng);
        positions.push(spec.r0 + sr * z0);
        momenta.push(HBAR * spec.k0 + sp * z1);
    }
    let ground = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
    Ok(InitialEnsemble {
        positions,
        momenta,
        seed,
        coefficients: vec![ground; n_traj],
    })
}

fn box_muller<R: Rng>(rng: &mut R) -> (f64, f64) {
    // gen() is in [0, 1); shift to (0, 1] so the logarithm stays finite.
    let u1 = 1.0 - rng.gen::<f64>();
    let u2 = rng.gen::<f64>();
    let radius = (-2.0 * u1.ln()).sqrt();
    let (s, c) = (2.0 * PI * u2).sin_cos();
    (radius * c, radius * s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(k0: f64) -> WavepacketSpec {
        WavepacketSpec { r0: -20.0, k0, sigma_packet: 2f64.sqrt() }
    }

    fn moments(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, var.sqrt())
    }

    #[test]
    fn wigner_moments_at_a_million_samples() {
        let ens = sample_wigner(&spec(25.0), 1_000_000, 7).unwrap();
        let (mr, sr) = moments(&ens.positions);
        let (mp, sp) = moments(&ens.momenta);
        // Standard error of a std estimate is sigma / sqrt(2n).
        let n = 1e6f64;
        assert!((sr - 1.0).abs() < 5.0 * 1.0 / (2.0 * n).sqrt(), "{sr}");
        assert!((sp - 0.5).abs() < 5.0 * 0.5 / (2.0 * n).sqrt(), "{sp}");
        assert!((mr + 20.0).abs() < 5.0 / n.sqrt());
        assert!((mp - 25.0).abs() < 5.0 * 0.5 / n.sqrt());
        let cov = ens
            .positions
            .iter()
            .zip(&ens.momenta)
            .map(|(r, p)| (r - mr) * (p - mp))
            .sum::<f64>()
            / n;
        assert!(cov.abs() < 5.0 * 0.5 / n.sqrt(), "cov {cov}");
    }

    #[test]
    fn means_within_five_standard_errors() {
        for seed in 0..20 {
            let ens = sample_wigner(&spec(0.0), 10_000, seed).unwrap();
            let (mr, _) = moments(&ens.positions);
            let (mp, _) = moments(&ens.momenta);
            assert!((mr + 20.0).abs() < 5.0 * 1.0 / 100.0);
            assert!(mp.abs() < 5.0 * 0.5 / 100.0);
        }
    }

    #[test]
    fn deterministic_and_prefix_stable() {
        let a = sample_wigner(&spec(25.0), 1, 42).unwrap();
        let b = sample_wigner(&spec(25.0), 1, 42).unwrap();
        assert_eq!(a, b);
        let small = sample_wigner(&spec(25.0), 200, 3).unwrap();
        let large = sample_wigner(&spec(25.0), 500, 3).unwrap();
        assert_eq!(small.positions[..], large.positions[..200]);
        assert_eq!(small.momenta[..], large.momenta[..200]);
    }

    #[test]
    fn ground_state_start() {
        let ens = sample_wigner(&spec(25.0), 10, 1).unwrap();
        for c in &ens.coefficients {
            assert_eq!(c[0].norm_sqr(), 1.0);
            assert_eq!(c[1], Complex64::new(0.0, 0.0));
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(sample_wigner(&spec(25.0), 0, 1).is_err());
        let bad = WavepacketSpec { sigma_packet: 0.0, ..spec(1.0) };
        assert!(sample_wigner(&bad, 10, 1).is_err());
    }
}
