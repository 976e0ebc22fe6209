//! Quantum momentum reconstructed from the trajectory swarm.
//!
//! For an ordered state pair (m, l) the quantum momentum on trajectory
//! alpha is quasi-linear in position, `P = slope * R - Y`, with slope
//! `hbar / (2 sigma^2)`. The intercept `Y` is what distinguishes the
//! variants:
//!
//! * [`QmVariant::CutOff`]: the single intercept that zeroes the ensemble
//!   population transfer, replaced by a Gaussian-kernel intercept for
//!   trajectories too far from it (or when its denominator vanishes).
//! * [`QmVariant::Regularised`]: the single-intercept momentum written as
//!   `(hbar / 2 sigma) / x` and regularised to `x / (x^2 + eps^2)`.
//! * [`QmVariant::DoubleIntercept`]: one intercept per sign of the
//!   Born-Oppenheimer momentum difference, each zeroing the transfer on its
//!   own subset. Weights are convex on each subset, so nothing diverges.
//!
//! All reductions run sequentially in trajectory order so results do not
//! depend on the number of worker threads.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::NSTATES;
use crate::units::{rate_au_to_per_fs, HBAR};

/// BO-momentum differences at or below this magnitude exclude a trajectory
/// from both double-intercept branches.
pub const BRANCH_ZERO_TOLERANCE: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum QmVariant {
    #[serde(rename = "di")]
    DoubleIntercept,
    #[serde(rename = "reg")]
    Regularised,
    #[serde(rename = "cutoff")]
    CutOff,
    /// Quantum momentum identically zero. Reduces CTMQC to Ehrenfest.
    #[serde(rename = "zero")]
    Zero,
}

impl QmVariant {
    pub const BENCHMARKED: [QmVariant; 3] =
        [QmVariant::DoubleIntercept, QmVariant::Regularised, QmVariant::CutOff];

    pub fn as_str(self) -> &'static str {
        match self {
            QmVariant::DoubleIntercept => "di",
            QmVariant::Regularised => "reg",
            QmVariant::CutOff => "cutoff",
            QmVariant::Zero => "zero",
        }
    }
}

impl fmt::Display for QmVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for QmVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "di" => Ok(QmVariant::DoubleIntercept),
            "reg" => Ok(QmVariant::Regularised),
            "cutoff" => Ok(QmVariant::CutOff),
            "zero" => Ok(QmVariant::Zero),
            other => Err(Error::config(format!("unknown qm_variant {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QmParams {
    /// Frozen Gaussian width (bohr).
    pub sigma: f64,
    pub variant: QmVariant,
    /// Dimensionless regularisation parameter.
    pub epsilon: f64,
    /// Cut-off radius in units of `sigma`.
    pub cutoff_radius_sigmas: f64,
    /// Threshold on the single-intercept denominator (a.u.).
    pub denom_cutoff: f64,
}

impl QmParams {
    pub fn new(variant: QmVariant) -> Self {
        QmParams {
            sigma: (0.2f64).sqrt(),
            variant,
            epsilon: 0.05,
            cutoff_radius_sigmas: 10.0,
            denom_cutoff: 1e-8,
        }
    }

    pub fn slope(&self) -> f64 {
        HBAR / (2.0 * self.sigma * self.sigma)
    }

    pub fn cutoff_radius(&self) -> f64 {
        self.cutoff_radius_sigmas * self.sigma
    }

    /// Largest |P| the cut-off procedure can produce.
    pub fn cutoff_bound(&self) -> f64 {
        self.slope() * self.cutoff_radius()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) {
            return Err(Error::config("sigma_qm_bohr must be positive"));
        }
        if self.variant == QmVariant::Regularised && !(self.epsilon > 0.0) {
            return Err(Error::config("epsilon must be positive for qm_variant \"reg\""));
        }
        if !(self.cutoff_radius_sigmas > 0.0) {
            return Err(Error::config("cutoff_radius_sigmas must be positive"));
        }
        if !(self.denom_cutoff >= 0.0) {
            return Err(Error::config("denom_cutoff must be non-negative"));
        }
        Ok(())
    }
}

/// Per-trajectory inputs for one ordered state pair (m, l).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PairInputs {
    pub pair: (usize, usize),
    pub positions: Vec<f64>,
    /// `f_m - f_l` with whichever BO momentum drives the dynamics.
    pub f_diff: Vec<f64>,
    /// `|rho_ml|^2 = |C_m|^2 |C_l|^2`.
    pub coherence: Vec<f64>,
}

impl PairInputs {
    pub fn new(pair: (usize, usize), positions: Vec<f64>, f_diff: Vec<f64>, coherence: Vec<f64>) -> Self {
        assert_eq!(positions.len(), f_diff.len());
        assert_eq!(positions.len(), coherence.len());
        PairInputs { pair, positions, f_diff, coherence }
    }

    pub fn from_states(
        positions: &[f64],
        coefficients: &[[Complex64; NSTATES]],
        f_eff: &[[f64; NSTATES]],
        (m, l): (usize, usize),
    ) -> Self {
        let f_diff = f_eff.iter().map(|f| f[m] - f[l]).collect();
        let coherence = coefficients
            .iter()
            .map(|c| c[m].norm_sqr() * c[l].norm_sqr())
            .collect();
        PairInputs::new((m, l), positions.to_vec(), f_diff, coherence)
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// `(f_m - f_l) |rho_ml|^2` on trajectory `alpha`.
    pub fn weight(&self, alpha: usize) -> f64 {
        self.f_diff[alpha] * self.coherence[alpha]
    }

    /// Ensemble sums of the transfer weight and of position times weight.
    fn moments(&self, mut keep: impl FnMut(usize) -> bool) -> (f64, f64) {
        let mut sw = 0.0;
        let mut srw = 0.0;
        for alpha in 0..self.len() {
            if keep(alpha) {
                let w = self.weight(alpha);
                sw += w;
                srw += self.positions[alpha] * w;
            }
        }
        (sw, srw)
    }

    pub fn branch_of(&self, alpha: usize) -> Branch {
        let d = self.f_diff[alpha];
        if d > BRANCH_ZERO_TOLERANCE {
            Branch::Plus
        } else if d < -BRANCH_ZERO_TOLERANCE {
            Branch::Minus
        } else {
            Branch::Excluded
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    Plus,
    Minus,
    Excluded,
}

/// How the quantum momentum of one trajectory was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrajTag {
    /// Double intercept, positive branch.
    Plus,
    /// Double intercept, negative branch.
    Minus,
    /// Zero BO-momentum difference; quantum momentum set to zero.
    Excluded,
    /// Single ensemble intercept.
    Primary,
    /// Cut-off procedure substituted the Gaussian-kernel intercept.
    Fallback,
    /// Cut-off procedure found no usable intercept; P = 0.
    Isolated,
    Regularised,
    Zero,
}

impl TrajTag {
    pub fn as_str(self) -> &'static str {
        match self {
            TrajTag::Plus => "+",
            TrajTag::Minus => "-",
            TrajTag::Excluded => "excluded",
            TrajTag::Primary => "primary",
            TrajTag::Fallback => "fallback",
            TrajTag::Isolated => "isolated",
            TrajTag::Regularised => "reg",
            TrajTag::Zero => "zero",
        }
    }
}

impl From<Branch> for TrajTag {
    fn from(b: Branch) -> Self {
        match b {
            Branch::Plus => TrajTag::Plus,
            Branch::Minus => TrajTag::Minus,
            Branch::Excluded => TrajTag::Excluded,
        }
    }
}

/// Ensemble-level intercepts that produced a field.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Intercepts {
    /// Single intercept; `None` when its denominator fell below the cut-off.
    Single(Option<f64>),
    Double { plus: f64, minus: f64 },
    None,
}

/// Returned when the single-intercept denominator is below `denom_cutoff`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Divergence {
    pub denominator: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuantumMomentumField {
    pub pair: (usize, usize),
    /// `P_ml` per trajectory; equal to `P_lm`.
    pub p: Vec<f64>,
    pub intercepts: Intercepts,
    /// Intercept each trajectory's `P = slope R - Y` was built from (NaN when
    /// P was not obtained that way).
    pub intercept_used: Vec<f64>,
    /// Double-intercept weights; zero for other variants.
    pub weights: Vec<f64>,
    pub tags: Vec<TrajTag>,
}

impl QuantumMomentumField {
    pub fn zeros(pair: (usize, usize), n: usize) -> Self {
        QuantumMomentumField {
            pair,
            p: vec![0.0; n],
            intercepts: Intercepts::None,
            intercept_used: vec![f64::NAN; n],
            weights: vec![0.0; n],
            tags: vec![TrajTag::Zero; n],
        }
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    /// Symmetric per-pair matrix of the quantum momentum on one trajectory.
    pub fn pair_matrix(&self, alpha: usize) -> [[f64; NSTATES]; NSTATES] {
        let mut q = [[0.0; NSTATES]; NSTATES];
        let (m, l) = self.pair;
        q[m][l] = self.p[alpha];
        q[l][m] = self.p[alpha];
        q
    }

    /// Trajectories where the cut-off procedure replaced the intercept.
    pub fn substituted(&self) -> usize {
        self.tags
            .iter()
            .filter(|t| matches!(t, TrajTag::Fallback | TrajTag::Isolated))
            .count()
    }
}

/// Single intercept that zeroes the ensemble population transfer.
pub fn intercept_original(inp: &PairInputs, params: &QmParams) -> std::result::Result<f64, Divergence> {
    let (sw, srw) = inp.moments(|_| true);
    let n = inp.len() as f64;
    let denominator = sw / n;
    if !(denominator.abs() >= params.denom_cutoff) || denominator == 0.0 {
        return Err(Divergence { denominator });
    }
    Ok(params.slope() * srw / sw)
}

/// Gaussian-kernel intercept for trajectory `alpha`: slope times the
/// kernel-weighted mean position seen from `alpha`.
pub fn intercept_gaussian_fallback(positions: &[f64], alpha: usize, params: &QmParams) -> f64 {
    let ra = positions[alpha];
    let inv = 1.0 / (2.0 * params.sigma * params.sigma);
    let mut num = 0.0;
    let mut den = 0.0;
    for &rb in positions {
        let g = (-(ra - rb).powi(2) * inv).exp();
        num += rb * g;
        den += g;
    }
    params.slope() * num / den
}

pub fn qm_cutoff(inp: &PairInputs, params: &QmParams) -> QuantumMomentumField {
    let n = inp.len();
    let slope = params.slope();
    let radius = params.cutoff_radius();
    let single = intercept_original(inp, params).ok();
    let mut field = QuantumMomentumField::zeros(inp.pair, n);
    field.intercepts = Intercepts::Single(single);
    for alpha in 0..n {
        let r = inp.positions[alpha];
        let within = |y: f64| (r - y / slope).abs() <= radius;
        let (y, tag) = match single {
            Some(y) if within(y) => (Some(y), TrajTag::Primary),
            _ => {
                let y = intercept_gaussian_fallback(&inp.positions, alpha, params);
                if within(y) {
                    (Some(y), TrajTag::Fallback)
                } else {
                    (None, TrajTag::Isolated)
                }
            }
        };
        field.tags[alpha] = tag;
        if let Some(y) = y {
            field.p[alpha] = slope * r - y;
            field.intercept_used[alpha] = y;
        }
    }
    field
}

pub fn qm_regularised(inp: &PairInputs, params: &QmParams) -> QuantumMomentumField {
    let n = inp.len();
    let nf = n as f64;
    let (sw, srw) = inp.moments(|_| true);
    let mean_w = sw / nf;
    let mean_rw = srw / nf;
    let prefactor = HBAR / (2.0 * params.sigma);
    let eps2 = params.epsilon * params.epsilon;
    let mut field = QuantumMomentumField::zeros(inp.pair, n);
    field.intercepts = Intercepts::Single(intercept_original(inp, params).ok());
    for alpha in 0..n {
        // x = a / b; x / (x^2 + eps^2) = a b / (a^2 + eps^2 b^2).
        let a = params.sigma * mean_w;
        let b = inp.positions[alpha] * mean_w - mean_rw;
        let den = a * a + eps2 * b * b;
        field.p[alpha] = if den > 0.0 { prefactor * a * b / den } else { 0.0 };
        field.tags[alpha] = TrajTag::Regularised;
    }
    field
}

pub fn qm_double_intercept(inp: &PairInputs, params: &QmParams) -> QuantumMomentumField {
    let n = inp.len();
    let slope = params.slope();
    let branches: Vec<Branch> = (0..n).map(|a| inp.branch_of(a)).collect();
    let (sw_plus, srw_plus) = inp.moments(|a| branches[a] == Branch::Plus);
    let (sw_minus, srw_minus) = inp.moments(|a| branches[a] == Branch::Minus);
    // An empty (or fully incoherent) branch gets a zero intercept; its
    // members carry zero transfer weight so the value never matters.
    let y = |sw: f64, srw: f64| if sw != 0.0 { slope * srw / sw } else { 0.0 };
    let (y_plus, y_minus) = (y(sw_plus, srw_plus), y(sw_minus, srw_minus));
    let mut field = QuantumMomentumField::zeros(inp.pair, n);
    field.intercepts = Intercepts::Double { plus: y_plus, minus: y_minus };
    for (alpha, &branch) in branches.iter().enumerate() {
        field.tags[alpha] = branch.into();
        let (y, sw) = match branch {
            Branch::Plus => (y_plus, sw_plus),
            Branch::Minus => (y_minus, sw_minus),
            Branch::Excluded => continue,
        };
        field.p[alpha] = slope * inp.positions[alpha] - y;
        field.intercept_used[alpha] = y;
        if sw != 0.0 {
            field.weights[alpha] = inp.weight(alpha) / sw;
        }
    }
    field
}

/// Dispatches on `params.variant`.
pub fn compute(inp: &PairInputs, params: &QmParams) -> QuantumMomentumField {
    match params.variant {
        QmVariant::DoubleIntercept => qm_double_intercept(inp, params),
        QmVariant::Regularised => qm_regularised(inp, params),
        QmVariant::CutOff => qm_cutoff(inp, params),
        QmVariant::Zero => QuantumMomentumField::zeros(inp.pair, inp.len()),
    }
}

/// Trajectory average `<P (f_m - f_l) |rho_ml|^2>`; zero when the field
/// prevents spurious population transfer.
pub fn transfer_residual(inp: &PairInputs, field: &QuantumMomentumField) -> f64 {
    let mut s = 0.0;
    for alpha in 0..inp.len() {
        s += field.p[alpha] * inp.weight(alpha);
    }
    s / inp.len() as f64
}

/// Spurious population transfer indicator
/// `N <(2/M) P (f_m - f_l) |rho_ml|^2>` in inverse femtoseconds.
pub fn spurious_transfer_indicator(inp: &PairInputs, field: &QuantumMomentumField, mass: f64) -> f64 {
    let nf = inp.len() as f64;
    rate_au_to_per_fs(nf * 2.0 / mass * transfer_residual(inp, field))
}

/// Population-rate residuals `(2 / hbar M) <P w>` restricted to the positive
/// and negative branches, in inverse atomic time units.
pub fn branch_residuals(inp: &PairInputs, field: &QuantumMomentumField, mass: f64) -> [f64; 2] {
    let mut acc = [0.0; 2];
    for alpha in 0..inp.len() {
        let slot = match inp.branch_of(alpha) {
            Branch::Plus => 0,
            Branch::Minus => 1,
            Branch::Excluded => continue,
        };
        acc[slot] += field.p[alpha] * inp.weight(alpha);
    }
    let scale = 2.0 / (HBAR * mass * inp.len() as f64);
    [acc[0] * scale, acc[1] * scale]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inputs(r: &[f64], fd: &[f64], coh: &[f64]) -> PairInputs {
        PairInputs::new((1, 0), r.to_vec(), fd.to_vec(), coh.to_vec())
    }

    fn params(variant: QmVariant) -> QmParams {
        QmParams::new(variant)
    }

    #[test]
    fn symmetric_pair_has_zero_intercept() {
        let p = params(QmVariant::CutOff);
        let inp = inputs(&[-0.7, 0.7], &[1.0, 1.0], &[0.2, 0.2]);
        let y = intercept_original(&inp, &p).unwrap();
        assert!(y.abs() < 1e-15);
        let f = qm_cutoff(&inp, &p);
        assert!((f.p[0] + p.slope() * 0.7).abs() < 1e-14);
        assert!((f.p[1] - p.slope() * 0.7).abs() < 1e-14);
    }

    #[test]
    fn single_weighted_trajectory_gets_zero_momentum() {
        let p = params(QmVariant::CutOff);
        let inp = inputs(&[1.3, 2.0, -0.4], &[0.5, 0.3, 0.1], &[0.1, 0.0, 0.0]);
        let y = intercept_original(&inp, &p).unwrap();
        assert!((y - p.slope() * 1.3).abs() < 1e-14);
        assert!(qm_cutoff(&inp, &p).p[0].abs() < 1e-14);
    }

    #[test]
    fn cancelling_weights_diverge() {
        let p = params(QmVariant::CutOff);
        let inp = inputs(&[0.0, 1.0], &[0.4, -0.4], &[0.25, 0.25]);
        assert!(matches!(intercept_original(&inp, &p), Err(Divergence { .. })));
    }

    #[test]
    fn gaussian_fallback_limits() {
        let p = params(QmVariant::CutOff);
        assert!((intercept_gaussian_fallback(&[3.0], 0, &p) - p.slope() * 3.0).abs() < 1e-14);
        let same = [2.5; 4];
        assert!((intercept_gaussian_fallback(&same, 1, &p) - p.slope() * 2.5).abs() < 1e-14);
        // Own kernel dominates as the cluster recedes.
        let mut prev = f64::INFINITY;
        for sep in [1.0, 2.0, 4.0, 8.0] {
            let pos = [0.0, sep, sep + 0.1, sep - 0.1];
            let dev = (intercept_gaussian_fallback(&pos, 0, &p) / p.slope()).abs();
            assert!(dev < prev);
            prev = dev;
        }
        assert!(prev < 1e-20);
    }

    #[test]
    fn cutoff_radius_edge_reaches_the_bound() {
        let p = params(QmVariant::CutOff);
        let radius = p.cutoff_radius();
        // Centre of the single intercept at 0; one trajectory exactly on the
        // radius with negligible weight.
        let inp = inputs(&[-1.0, 1.0, radius], &[1.0, 1.0, 1.0], &[0.2, 0.2, 0.0]);
        let f = qm_cutoff(&inp, &p);
        assert_eq!(f.tags[2], TrajTag::Primary);
        assert!((f.p[2] - 5.0 * HBAR / p.sigma).abs() < 1e-12);
        assert!((p.cutoff_bound() - 5.0 / p.sigma).abs() < 1e-12);
    }

    #[test]
    fn isolated_trajectory_has_zero_momentum() {
        let p = params(QmVariant::CutOff);
        let inp = inputs(&[-1.0, 1.0, 100.0], &[1.0, 1.0, 1.0], &[0.2, 0.2, 0.0]);
        let f = qm_cutoff(&inp, &p);
        // The fallback centre is the trajectory itself: P is exactly zero.
        assert_eq!(f.tags[2], TrajTag::Fallback);
        assert_eq!(f.p[2], 0.0);
    }

    #[test]
    fn trajectory_beyond_both_radii_is_zeroed() {
        let mut p = params(QmVariant::CutOff);
        p.cutoff_radius_sigmas = 0.5;
        // The original intercept diverges (cancelling weights on the
        // cluster) and the kernel centre of the lone trajectory at 0 is
        // pulled about 0.6 bohr towards the 20-member cluster at 1.
        let mut r = vec![0.0];
        let mut fd = vec![1.0];
        let mut coh = vec![0.0];
        for i in 0..20 {
            r.push(1.0);
            fd.push(if i % 2 == 0 { 1.0 } else { -1.0 });
            coh.push(0.2);
        }
        let inp = inputs(&r, &fd, &coh);
        let f = qm_cutoff(&inp, &p);
        assert_eq!(f.intercepts, Intercepts::Single(None));
        assert_eq!(f.tags[0], TrajTag::Isolated);
        assert_eq!(f.p[0], 0.0);
        assert!(f.tags[1..].iter().all(|&t| t == TrajTag::Fallback));
    }

    #[test]
    fn divergent_denominator_uses_gaussian_intercept() {
        let p = params(QmVariant::CutOff);
        let r = [0.0, 0.3, 0.1];
        let inp = inputs(&r, &[0.4, -0.4, 0.7], &[0.25, 0.25, 0.0]);
        let f = qm_cutoff(&inp, &p);
        assert_eq!(f.intercepts, Intercepts::Single(None));
        // Hand-evaluated kernel mean seen from trajectory 0.
        let g = |d: f64| (-d * d / (2.0 * 0.2)).exp();
        let mean = (0.0 * g(0.0) + 0.3 * g(0.3) + 0.1 * g(0.1)) / (g(0.0) + g(0.3) + g(0.1));
        assert_eq!(f.tags[0], TrajTag::Fallback);
        assert!((f.p[0] - p.slope() * (0.0 - mean)).abs() < 1e-13);
    }

    #[test]
    fn regularised_extremum_and_limits() {
        let p = params(QmVariant::Regularised);
        let sigma = p.sigma;
        // Trajectory 0 carries no weight; choose its position so x = eps.
        // x = sigma <w> / (R <w> - <R w>) with the weight on R = 0 only.
        let w = 0.2;
        let target_x = p.epsilon;
        let r_alpha = sigma / target_x;
        let inp = inputs(&[r_alpha, 0.0], &[0.0, 1.0], &[0.0, w]);
        let f = qm_regularised(&inp, &p);
        let peak = HBAR / (4.0 * sigma * p.epsilon);
        assert!((f.p[0] - peak).abs() < 1e-12 * peak);
        assert!((peak - HBAR / (2.0 * p.epsilon) / (2.0 * sigma)).abs() < 1e-12);

        // |x| = 100 eps: within 0.01% of the unregularised value.
        let r_alpha = sigma / (100.0 * p.epsilon);
        let inp = inputs(&[r_alpha, 0.0], &[0.0, 1.0], &[0.0, w]);
        let f = qm_regularised(&inp, &p);
        let bare = p.slope() * r_alpha;
        assert!(((f.p[0] - bare) / bare).abs() < 1e-4);

        // x -> infinity as the trajectory approaches the centre.
        let inp = inputs(&[1e-300, 0.0], &[0.0, 1.0], &[0.0, w]);
        assert!(qm_regularised(&inp, &p).p[0].abs() < 1e-290);
    }

    #[test]
    fn regularised_is_total_at_zero_denominator() {
        let p = params(QmVariant::Regularised);
        let inp = inputs(&[0.0, 1.0], &[0.4, -0.4], &[0.25, 0.25]);
        let f = qm_regularised(&inp, &p);
        assert!(f.p.iter().all(|v| v.is_finite()));
        assert_eq!(f.p, vec![0.0, 0.0]);
    }

    #[test]
    fn double_intercept_hand_example() {
        let p = params(QmVariant::DoubleIntercept);
        let inp = inputs(&[0.0, 1.0], &[2.0, 2.0], &[0.1, 0.1]);
        let f = qm_double_intercept(&inp, &p);
        let s = p.slope();
        assert_eq!(f.intercepts, Intercepts::Double { plus: s * 0.5, minus: 0.0 });
        assert!((f.p[0] + s * 0.5).abs() < 1e-15);
        assert!((f.p[1] - s * 0.5).abs() < 1e-15);
        assert_eq!(f.weights, vec![0.5, 0.5]);
        // Brute-force sum over the positive subset.
        let residual: f64 = (0..2).map(|a| f.p[a] * inp.weight(a)).sum();
        assert!(residual.abs() < 1e-15);
    }

    #[test]
    fn double_intercept_single_member_branch() {
        let p = params(QmVariant::DoubleIntercept);
        let inp = inputs(&[3.0, -2.0], &[1.0, -1.0], &[0.2, 0.1]);
        let f = qm_double_intercept(&inp, &p);
        assert!(f.p.iter().all(|x| x.abs() < 1e-14), "{:?}", f.p);
        assert_eq!(f.tags, vec![TrajTag::Plus, TrajTag::Minus]);
    }

    #[test]
    fn double_intercept_matches_single_when_one_branch() {
        let p = params(QmVariant::DoubleIntercept);
        let inp = inputs(&[-1.0, 0.2, 2.5, 4.0], &[0.3, 0.1, 0.9, 0.4], &[0.1, 0.2, 0.05, 0.01]);
        let di = qm_double_intercept(&inp, &p);
        let y = intercept_original(&inp, &p).unwrap();
        for a in 0..4 {
            assert!((di.p[a] - (p.slope() * inp.positions[a] - y)).abs() < 1e-13);
        }
    }

    #[test]
    fn excluded_and_empty_branches() {
        let p = params(QmVariant::DoubleIntercept);
        let inp = inputs(&[1.0, 2.0], &[0.0, 1e-15], &[0.2, 0.2]);
        let f = qm_double_intercept(&inp, &p);
        assert_eq!(f.tags, vec![TrajTag::Excluded, TrajTag::Excluded]);
        assert_eq!(f.p, vec![0.0, 0.0]);
        assert_eq!(f.intercepts, Intercepts::Double { plus: 0.0, minus: 0.0 });
    }

    #[test]
    fn no_coherence_no_residual() {
        let inp = inputs(&[1.0, 2.0, 3.0], &[1.0, -2.0, 0.5], &[0.0; 3]);
        for v in QmVariant::BENCHMARKED {
            let f = compute(&inp, &params(v));
            assert_eq!(spurious_transfer_indicator(&inp, &f, 2000.0), 0.0);
        }
    }

    #[test]
    fn cutoff_fallback_breaks_transfer_condition() {
        let p = params(QmVariant::CutOff);
        let inp = inputs(&[0.0, 0.5, 1.0, 1.2], &[0.4, -0.4, 0.3, -0.3], &[0.2, 0.2, 0.1, 0.1]);
        let f = qm_cutoff(&inp, &p);
        assert!(f.substituted() > 0);
        assert!(spurious_transfer_indicator(&inp, &f, 2000.0).abs() > 1e-6);
        let di = qm_double_intercept(&inp, &params(QmVariant::DoubleIntercept));
        assert!(spurious_transfer_indicator(&inp, &di, 2000.0).abs() < 1e-12);
    }

    #[test]
    fn variant_names_roundtrip() {
        for v in [QmVariant::DoubleIntercept, QmVariant::Regularised, QmVariant::CutOff, QmVariant::Zero] {
            assert_eq!(v.as_str().parse::<QmVariant>().unwrap(), v);
        }
        assert!("bogus".parse::<QmVariant>().is_err());
    }

    #[test]
    fn regularised_needs_positive_epsilon() {
        let mut p = params(QmVariant::Regularised);
        p.epsilon = 0.0;
        assert!(p.validate().is_err());
    }
}
