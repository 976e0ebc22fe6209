//! Coupled propagation of the trajectory ensemble.
//!
//! Nuclei move by velocity Verlet. Electronic coefficients are advanced by
//! RK4 along the Verlet path: adiabatic energies and couplings are
//! interpolated linearly between the step end points and the mid-step
//! velocity is used, while the quantum momentum and BO momenta are held at
//! their step-start values. The quantum momentum is an ensemble reduction
//! recomputed once per step from the updated ensemble.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::{modified_bo_momentum, renormalise};
use crate::error::{Error, Result};
use crate::model::{adiabatic, adiabatize_aligned, diabatic, with_position, AdiabaticData, ModelId, NSTATES};
use crate::qmom::{self, PairInputs, QmParams, QuantumMomentumField};
use crate::sampling::InitialEnsemble;
use crate::units::{au_to_fs, HBAR};

pub type Coeffs = [Complex64; NSTATES];

/// Coherence below which the optional BO-momentum reset fires.
pub const RESET_COHERENCE_THRESHOLD: f64 = 1e-10;

const PAIR: (usize, usize) = (1, 0);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "ehrenfest")]
    Ehrenfest,
    #[serde(rename = "ctmqc")]
    Ctmqc,
    /// CTMQC with the energy-conserving BO momentum.
    #[serde(rename = "ctmqc-e")]
    CtmqcE,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Ehrenfest => "ehrenfest",
            Method::Ctmqc => "ctmqc",
            Method::CtmqcE => "ctmqc-e",
        }
    }

    pub fn has_quantum_momentum(self) -> bool {
        self != Method::Ehrenfest
    }

    pub fn energy_corrected(self) -> bool {
        self == Method::CtmqcE
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ehrenfest" => Ok(Method::Ehrenfest),
            "ctmqc" => Ok(Method::Ctmqc),
            "ctmqc-e" => Ok(Method::CtmqcE),
            other => Err(Error::config(format!("unknown method {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryState {
    pub r: f64,
    pub v: f64,
    pub c: Coeffs,
    /// Accumulated BO momentum per state.
    pub f_acc: [f64; NSTATES],
    pub adiab: AdiabaticData,
    /// Total force at the current position.
    pub force: f64,
    /// Log of the product of the norms divided out by renormalisation.
    pub log_norm_scale: f64,
}

impl TrajectoryState {
    pub fn norm(&self) -> f64 {
        self.c.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Norm the coefficients would have without renormalisation.
    pub fn tracked_norm(&self) -> f64 {
        self.log_norm_scale.exp() * self.norm()
    }

    pub fn populations(&self) -> [f64; NSTATES] {
        [self.c[0].norm_sqr(), self.c[1].norm_sqr()]
    }

    /// `|rho_01|^2`.
    pub fn coherence(&self) -> f64 {
        self.c[0].norm_sqr() * self.c[1].norm_sqr()
    }

    pub fn kinetic_energy(&self, mass: f64) -> f64 {
        0.5 * mass * self.v * self.v
    }
}

/// Electronic density matrix `rho[l][m] = conj(c_l) c_m`.
pub fn density_matrix(c: &Coeffs) -> [[Complex64; NSTATES]; NSTATES] {
    let mut rho = [[Complex64::new(0.0, 0.0); NSTATES]; NSTATES];
    for l in 0..NSTATES {
        for m in 0..NSTATES {
            rho[l][m] = c[l].conj() * c[m];
        }
    }
    rho
}

#[derive(Clone, Debug)]
pub struct EnsembleState {
    pub trajs: Vec<TrajectoryState>,
    /// Time in atomic units.
    pub t: f64,
    pub step: usize,
    /// BO momentum entering the XF terms (accumulated or modified).
    pub f_eff: Vec<[f64; NSTATES]>,
    pub qm: QuantumMomentumField,
    /// Trajectories where the modified BO momentum fell back to `f_acc`.
    pub ekin_fallback: Vec<bool>,
}

impl EnsembleState {
    pub fn n_traj(&self) -> usize {
        self.trajs.len()
    }

    pub fn t_fs(&self) -> f64 {
        au_to_fs(self.t)
    }

    pub fn positions(&self) -> Vec<f64> {
        self.trajs.iter().map(|t| t.r).collect()
    }

    pub fn coefficients(&self) -> Vec<Coeffs> {
        self.trajs.iter().map(|t| t.c).collect()
    }

    /// Inputs of the (1, 0) quantum momentum for the current state.
    pub fn pair_inputs(&self) -> PairInputs {
        PairInputs::from_states(&self.positions(), &self.coefficients(), &self.f_eff, PAIR)
    }
}

/// Ehrenfest part of the coefficient time derivative.
pub fn electronic_rhs_ehrenfest(
    c: &Coeffs,
    e: &[f64; NSTATES],
    nacv: &[[f64; NSTATES]; NSTATES],
    v: f64,
) -> Coeffs {
    let mut out = [Complex64::new(0.0, 0.0); NSTATES];
    for m in 0..NSTATES {
        let mut acc = Complex64::new(0.0, -e[m] / HBAR) * c[m];
        for l in 0..NSTATES {
            acc -= c[l] * (v * nacv[m][l]);
        }
        out[m] = acc;
    }
    out
}

/// Exact-factorisation part of the coefficient time derivative,
/// `sum_l (P_ml / hbar M) (f_m - f_l) C_l rho_lm`.
pub fn electronic_rhs_xf(
    c: &Coeffs,
    qm: &[[f64; NSTATES]; NSTATES],
    f_eff: &[f64; NSTATES],
    mass: f64,
) -> Coeffs {
    let mut out = [Complex64::new(0.0, 0.0); NSTATES];
    for m in 0..NSTATES {
        let mut acc = Complex64::new(0.0, 0.0);
        for l in 0..NSTATES {
            if l == m {
                continue;
            }
            let rho_lm = c[l].conj() * c[m];
            acc += c[l] * rho_lm * (qm[m][l] / (HBAR * mass) * (f_eff[m] - f_eff[l]));
        }
        out[m] = acc;
    }
    out
}

/// `-sum_m rho_mm dE_m + sum_{m,l} Re(rho_ml) (E_m - E_l) d_ml`.
pub fn force_ehrenfest(c: &Coeffs, a: &AdiabaticData) -> f64 {
    let mut f = 0.0;
    for m in 0..NSTATES {
        f -= c[m].norm_sqr() * a.grad_e[m];
        for l in 0..NSTATES {
            if l != m {
                let re_rho_ml = (c[m].conj() * c[l]).re;
                f += re_rho_ml * (a.e[m] - a.e[l]) * a.nacv[m][l];
            }
        }
    }
    f
}

/// `sum_{m,l} [(P_ml / hbar M)(f_m - f_l)] |rho_ml|^2 (f_m - f_l)`.
/// Largest XF decay rate times dt allowed in one RK4 substep.
pub const XF_STEP_LIMIT: f64 = 0.5;

fn xf_substeps(ends: &XfEnds, mass: f64, dt: f64) -> usize {
    let rate = |(q, f): &([[f64; NSTATES]; NSTATES], [f64; NSTATES])| {
        2.0 * q[0][1].abs().max(q[1][0].abs()) * (f[1] - f[0]).abs() / (HBAR * mass)
    };
    let x = rate(&ends.0).max(rate(&ends.1)) * dt / XF_STEP_LIMIT;
    if x.is_finite() && x > 1.0 {
        (x.ceil() as usize).min(10_000)
    } else {
        1
    }
}

pub fn force_xf(c: &Coeffs, qm: &[[f64; NSTATES]; NSTATES], f_eff: &[f64; NSTATES], mass: f64) -> f64 {
    let mut f = 0.0;
    for m in 0..NSTATES {
        for l in 0..NSTATES {
            if l != m {
                let df = f_eff[m] - f_eff[l];
                let coh = c[m].norm_sqr() * c[l].norm_sqr();
                f += qm[m][l] / (HBAR * mass) * df * coh * df;
            }
        }
    }
    f
}

/// Trapezoidal update of `f_m += int -dE_m dt` over one step.
pub fn accumulate_bo_momentum(
    f_acc: &[f64; NSTATES],
    grad_old: &[f64; NSTATES],
    grad_new: &[f64; NSTATES],
    dt: f64,
) -> [f64; NSTATES] {
    let mut out = *f_acc;
    for m in 0..NSTATES {
        out[m] -= 0.5 * (grad_old[m] + grad_new[m]) * dt;
    }
    out
}

fn axpy(c: &Coeffs, k: &Coeffs, h: f64) -> Coeffs {
    [c[0] + k[0] * h, c[1] + k[1] * h]
}

/// Classical fourth-order Runge-Kutta step for `dc/dtau = rhs(tau, c)`.
pub fn rk4_step(c: &Coeffs, dt: f64, rhs: impl Fn(f64, &Coeffs) -> Coeffs) -> Coeffs {
    let k1 = rhs(0.0, c);
    let k2 = rhs(0.5 * dt, &axpy(c, &k1, 0.5 * dt));
    let k3 = rhs(0.5 * dt, &axpy(c, &k2, 0.5 * dt));
    let k4 = rhs(dt, &axpy(c, &k3, dt));
    let mut out = *c;
    for m in 0..NSTATES {
        out[m] += (k1[m] + (k2[m] + k3[m]) * 2.0 + k4[m]) * (dt / 6.0);
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct DynamicsSettings {
    pub model: ModelId,
    pub method: Method,
    pub qm: QmParams,
    pub mass: f64,
    /// Time step in atomic units.
    pub dt: f64,
    pub ekin_cutoff: f64,
    /// Zero `f_acc` whenever a trajectory's coherence drops below
    /// [`RESET_COHERENCE_THRESHOLD`].
    pub reset_bo_momentum: bool,
    pub threads: usize,
}

struct StepStart {
    c: Coeffs,
    adiab: AdiabaticData,
    force: f64,
}

type XfEnds = (([[f64; NSTATES]; NSTATES], [f64; NSTATES]), ([[f64; NSTATES]; NSTATES], [f64; NSTATES]));

pub struct Propagator {
    settings: DynamicsSettings,
    pool: Option<rayon::ThreadPool>,
}

impl fmt::Debug for Propagator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Propagator").field("settings", &self.settings).finish()
    }
}

struct Coupling {
    f_eff: Vec<[f64; NSTATES]>,
    fallback: Vec<bool>,
    qm: QuantumMomentumField,
}

impl Propagator {
    pub fn new(settings: DynamicsSettings) -> Result<Self> {
        settings.qm.validate()?;
        if !(settings.dt > 0.0 && settings.dt.is_finite()) {
            return Err(Error::config("time step must be positive"));
        }
        if !(settings.mass > 0.0) {
            return Err(Error::config("mass_au must be positive"));
        }
        let pool = if settings.threads > 1 {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(settings.threads)
                .build()
                .map_err(|e| Error::config(format!("thread pool: {e}")))?;
            Some(pool)
        } else {
            None
        };
        Ok(Propagator { settings, pool })
    }

    pub fn settings(&self) -> &DynamicsSettings {
        &self.settings
    }

    fn for_each_traj<F>(&self, trajs: &mut [TrajectoryState], f: F) -> Result<()>
    where
        F: Fn(usize, &mut TrajectoryState) -> Result<()> + Sync + Send,
    {
        match &self.pool {
            Some(pool) => pool.install(|| {
                trajs
                    .par_iter_mut()
                    .enumerate()
                    .try_for_each(|(i, t)| f(i, t))
            }),
            None => trajs.iter_mut().enumerate().try_for_each(|(i, t)| f(i, t)),
        }
    }

    pub fn init(&self, init: &InitialEnsemble) -> Result<EnsembleState> {
        let s = &self.settings;
        let mut trajs = Vec::with_capacity(init.len());
        for i in 0..init.len() {
            let r = init.positions[i];
            trajs.push(TrajectoryState {
                r,
                v: init.momenta[i] / s.mass,
                c: init.coefficients[i],
                f_acc: [0.0; NSTATES],
                adiab: adiabatic(s.model, r)?,
                force: 0.0,
                log_norm_scale: 0.0,
            });
        }
        let mut ens = EnsembleState {
            trajs,
            t: 0.0,
            step: 0,
            f_eff: Vec::new(),
            qm: QuantumMomentumField::zeros(PAIR, init.len()),
            ekin_fallback: vec![false; init.len()],
        };
        let velocities: Vec<f64> = ens.trajs.iter().map(|t| t.v).collect();
        let coupling = self.coupling(&ens.trajs, &velocities);
        for (alpha, t) in ens.trajs.iter_mut().enumerate() {
            t.force = self.total_force(t, &coupling, alpha);
        }
        ens.f_eff = coupling.f_eff;
        ens.qm = coupling.qm;
        ens.ekin_fallback = coupling.fallback;
        self.check_finite(&ens)?;
        Ok(ens)
    }

    /// BO momenta and quantum momentum for the given trajectory states,
    /// evaluated with `velocities` (which may be a prediction).
    fn coupling(&self, trajs: &[TrajectoryState], velocities: &[f64]) -> Coupling {
        let s = &self.settings;
        let n = trajs.len();
        if !s.method.has_quantum_momentum() {
            return Coupling {
                f_eff: trajs.iter().map(|t| t.f_acc).collect(),
                fallback: vec![false; n],
                qm: QuantumMomentumField::zeros(PAIR, n),
            };
        }
        let (f_eff, fallback) = if s.method.energy_corrected() {
            let energies: Vec<_> = trajs.iter().map(|t| t.adiab.e).collect();
            let f_acc: Vec<_> = trajs.iter().map(|t| t.f_acc).collect();
            let m = modified_bo_momentum(&energies, &f_acc, velocities, s.mass, s.ekin_cutoff);
            (m.f_tilde, m.used_fallback)
        } else {
            (trajs.iter().map(|t| t.f_acc).collect(), vec![false; n])
        };
        let positions: Vec<f64> = trajs.iter().map(|t| t.r).collect();
        let coeffs: Vec<Coeffs> = trajs.iter().map(|t| t.c).collect();
        let inp = PairInputs::from_states(&positions, &coeffs, &f_eff, PAIR);
        let qm = qmom::compute(&inp, &s.qm);
        Coupling { f_eff, fallback, qm }
    }

    fn total_force(&self, t: &TrajectoryState, coupling: &Coupling, alpha: usize) -> f64 {
        let mut f = force_ehrenfest(&t.c, &t.adiab);
        if self.settings.method.has_quantum_momentum() {
            let q = coupling.qm.pair_matrix(alpha);
            f += force_xf(&t.c, &q, &coupling.f_eff[alpha], self.settings.mass);
        }
        f
    }

    /// Advances the ensemble by one time step.
    ///
    /// With quantum momentum the electronic step is taken twice: a predictor
    /// holding the coupling at its step-start value, then a corrector with the
    /// coupling interpolated linearly towards its value at the predicted end
    /// state.
    pub fn step(&self, ens: &mut EnsembleState) -> Result<()> {
        let s = &self.settings;
        let dt = s.dt;
        let mass = s.mass;
        let xf = s.method.has_quantum_momentum();
        let renorm = s.method.energy_corrected();
        let n = ens.n_traj();

        let mut starts: Vec<StepStart> = Vec::with_capacity(n);
        for t in &ens.trajs {
            starts.push(StepStart { c: t.c, adiab: t.adiab, force: t.force });
        }

        let start_coupling = (&ens.qm, &ens.f_eff);
        self.for_each_traj(&mut ens.trajs, |alpha, t| {
            let v_half = t.v + 0.5 * dt * t.force / mass;
            let r_new = t.r + v_half * dt;
            let old = t.adiab;
            let new = adiabatize_aligned(&diabatic(s.model, r_new), &old).map_err(|e| with_position(e, r_new))?;
            let q = start_coupling.0.pair_matrix(alpha);
            let f = start_coupling.1[alpha];
            t.c = self.electronic_step(&t.c, &old, &new, v_half, xf.then_some(((q, f), (q, f))));
            t.f_acc = accumulate_bo_momentum(&t.f_acc, &old.grad_e, &new.grad_e, dt);
            if s.reset_bo_momentum && t.coherence() < RESET_COHERENCE_THRESHOLD {
                t.f_acc = [0.0; NSTATES];
            }
            t.r = r_new;
            t.v = v_half;
            t.adiab = new;
            Ok(())
        })?;

        // Velocities at t + dt predicted with the step-start force.
        let v_pred: Vec<f64> = ens.trajs.iter().zip(&starts).map(|(t, st)| t.v + 0.5 * dt * st.force / mass).collect();

        if xf {
            let predicted = self.coupling(&ens.trajs, &v_pred);
            let (qm_old, f_old) = start_coupling;
            self.for_each_traj(&mut ens.trajs, |alpha, t| {
                let st = &starts[alpha];
                let ends = (
                    (qm_old.pair_matrix(alpha), f_old[alpha]),
                    (predicted.qm.pair_matrix(alpha), predicted.f_eff[alpha]),
                );
                t.c = self.electronic_step(&st.c, &st.adiab, &t.adiab, t.v, Some(ends));
                Ok(())
            })?;
        }
        if renorm {
            self.for_each_traj(&mut ens.trajs, |_, t| {
                t.log_norm_scale += renormalise(&mut t.c)?;
                Ok(())
            })?;
        }

        let coupling = self.coupling(&ens.trajs, &v_pred);
        self.for_each_traj(&mut ens.trajs, |alpha, t| {
            t.force = self.total_force(t, &coupling, alpha);
            t.v += 0.5 * dt * t.force / mass;
            Ok(())
        })?;

        let coupling = if xf && renorm {
            let v_new: Vec<f64> = ens.trajs.iter().map(|t| t.v).collect();
            self.coupling(&ens.trajs, &v_new)
        } else {
            coupling
        };
        ens.f_eff = coupling.f_eff;
        ens.qm = coupling.qm;
        ens.ekin_fallback = coupling.fallback;
        ens.step += 1;
        ens.t = ens.step as f64 * dt;
        self.check_finite(ens)
    }

    /// RK4 over one step with energies and coupling interpolated between the
    /// endpoint geometries. `xf` holds the quantum momentum matrix and BO
    /// momenta at the start and end of the step.
    fn electronic_step(
        &self,
        c: &Coeffs,
        old: &AdiabaticData,
        new: &AdiabaticData,
        v: f64,
        xf: Option<XfEnds>,
    ) -> Coeffs {
        let dt = self.settings.dt;
        let mass = self.settings.mass;
        let n_sub = xf.as_ref().map_or(1, |ends| xf_substeps(ends, mass, dt));
        let h = dt / n_sub as f64;
        let mut c = *c;
        for j in 0..n_sub {
            let t0 = j as f64 * h;
            c = rk4_step(&c, h, |tau, c| {
                let w = (t0 + tau) / dt;
                let lerp = |a: f64, b: f64| a + w * (b - a);
                let e = [lerp(old.e[0], new.e[0]), lerp(old.e[1], new.e[1])];
                let d01 = lerp(old.nacv[0][1], new.nacv[0][1]);
                let nacv = [[0.0, d01], [-d01, 0.0]];
                let mut k = electronic_rhs_ehrenfest(c, &e, &nacv, v);
                if let Some(((q0, f0), (q1, f1))) = &xf {
                    let mut q = [[0.0; NSTATES]; NSTATES];
                    for m in 0..NSTATES {
                        for l in 0..NSTATES {
                            q[m][l] = lerp(q0[m][l], q1[m][l]);
                        }
                    }
                    let f = [lerp(f0[0], f1[0]), lerp(f0[1], f1[1])];
                    let x = electronic_rhs_xf(c, &q, &f, mass);
                    k[0] += x[0];
                    k[1] += x[1];
                }
                k
            });
        }
        c
    }

    fn check_finite(&self, ens: &EnsembleState) -> Result<()> {
        for (i, t) in ens.trajs.iter().enumerate() {
            let ok = t.r.is_finite()
                && t.v.is_finite()
                && t.force.is_finite()
                && t.c.iter().all(|c| c.re.is_finite() && c.im.is_finite())
                && t.f_acc.iter().all(|f| f.is_finite())
                && ens.qm.p[i].is_finite();
            if !ok {
                return Err(Error::NonFinite { traj: i, step: ens.step, t_fs: ens.t_fs() });
            }
        }
        Ok(())
    }
}
