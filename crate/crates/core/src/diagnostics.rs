//! Ensemble observables and their CSV serialisation.

use std::io::{self, BufRead, Write};
use std::path::Path;

use crate::dynamics::{EnsembleState, TrajectoryState};
use crate::error::{Error, Result};
use crate::model::NSTATES;
use crate::qmom;

pub const OBSERVABLE_COLUMNS: [&str; 9] = [
    "t_fs",
    "pop0",
    "pop1",
    "coherence",
    "energy_mean_ha",
    "energy_drift_ha",
    "norm_dev",
    "spurious_per_fs",
    "fallback_fraction",
];

#[derive(Clone, Debug, PartialEq)]
pub struct ObservableRecord {
    pub t_fs: f64,
    pub pop: [f64; NSTATES],
    pub coherence: f64,
    pub energy_mean: f64,
    pub energy_drift: f64,
    pub norm_dev: f64,
    pub spurious_per_fs: f64,
    pub fallback_fraction: f64,
}

impl ObservableRecord {
    fn values(&self) -> [f64; 9] {
        [
            self.t_fs,
            self.pop[0],
            self.pop[1],
            self.coherence,
            self.energy_mean,
            self.energy_drift,
            self.norm_dev,
            self.spurious_per_fs,
            self.fallback_fraction,
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.values().iter().all(|v| v.is_finite())
    }
}

impl serde::Serialize for ObservableRecord {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("ObservableRecord", 9)?;
        st.serialize_field("t_fs", &self.t_fs)?;
        st.serialize_field("pop0", &self.pop[0])?;
        st.serialize_field("pop1", &self.pop[1])?;
        st.serialize_field("coherence", &self.coherence)?;
        st.serialize_field("energy_mean_ha", &self.energy_mean)?;
        st.serialize_field("energy_drift_ha", &self.energy_drift)?;
        st.serialize_field("norm_dev", &self.norm_dev)?;
        st.serialize_field("spurious_per_fs", &self.spurious_per_fs)?;
        st.serialize_field("fallback_fraction", &self.fallback_fraction)?;
        st.end()
    }
}

impl<'de> serde::Deserialize<'de> for ObservableRecord {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(serde::Deserialize)]
        struct Raw {
            t_fs: f64,
            pop0: f64,
            pop1: f64,
            coherence: f64,
            energy_mean_ha: f64,
            energy_drift_ha: f64,
            norm_dev: f64,
            spurious_per_fs: f64,
            fallback_fraction: f64,
        }
        let r = <Raw as serde::Deserialize>::deserialize(d)?;
        Ok(ObservableRecord {
            t_fs: r.t_fs,
            pop: [r.pop0, r.pop1],
            coherence: r.coherence,
            energy_mean: r.energy_mean_ha,
            energy_drift: r.energy_drift_ha,
            norm_dev: r.norm_dev,
            spurious_per_fs: r.spurious_per_fs,
            fallback_fraction: r.fallback_fraction,
        })
    }
}

/// `E_kin + sum_m rho_mm E_m`.
pub fn trajectory_energy(t: &TrajectoryState, mass: f64) -> f64 {
    let p = t.populations();
    t.kinetic_energy(mass) + p[0] * t.adiab.e[0] + p[1] * t.adiab.e[1]
}

pub fn energy_mean(ens: &EnsembleState, mass: f64) -> f64 {
    mean(ens.trajs.iter().map(|t| trajectory_energy(t, mass)))
}

pub fn population_mean(ens: &EnsembleState) -> [f64; NSTATES] {
    let mut p = [0.0; NSTATES];
    for t in &ens.trajs {
        let q = t.populations();
        p[0] += q[0];
        p[1] += q[1];
    }
    let n = ens.n_traj() as f64;
    [p[0] / n, p[1] / n]
}

/// `< |C_0|^2 |C_1|^2 >`.
pub fn coherence_mean(ens: &EnsembleState) -> f64 {
    mean(ens.trajs.iter().map(|t| t.coherence()))
}

/// Mean `|1 - norm|`, using the norm before any renormalisation.
pub fn norm_deviation(ens: &EnsembleState) -> f64 {
    mean(ens.trajs.iter().map(|t| (1.0 - t.tracked_norm()).abs()))
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let mut n = 0usize;
    let mut s = 0.0;
    for x in xs {
        s += x;
        n += 1;
    }
    s / n as f64
}

/// Snapshot of the ensemble observables. `energy_ref` is the initial
/// trajectory-averaged energy.
pub fn observe(ens: &EnsembleState, mass: f64, energy_ref: f64) -> ObservableRecord {
    let energy = energy_mean(ens, mass);
    let inp = ens.pair_inputs();
    ObservableRecord {
        t_fs: ens.t_fs(),
        pop: population_mean(ens),
        coherence: coherence_mean(ens),
        energy_mean: energy,
        energy_drift: energy - energy_ref,
        norm_dev: norm_deviation(ens),
        spurious_per_fs: qmom::spurious_transfer_indicator(&inp, &ens.qm, mass),
        fallback_fraction: ens.ekin_fallback.iter().filter(|&&b| b).count() as f64 / ens.n_traj() as f64,
    }
}

/// `(Delta E_sim, Delta E(t))` for a series of trajectory-averaged energies.
pub fn drift(energies: &[f64]) -> Result<(f64, Vec<f64>)> {
    if energies.len() < 2 {
        return Err(Error::config("energy drift needs at least two records"));
    }
    let e0 = energies[0];
    let series: Vec<f64> = energies.iter().map(|e| e - e0).collect();
    Ok((*series.last().unwrap(), series))
}

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_observables<W: Write>(mut w: W, records: &[ObservableRecord]) -> io::Result<()> {
    writeln!(w, "{}", OBSERVABLE_COLUMNS.join(","))?;
    for r in records {
        let row: Vec<String> = r.values().iter().map(|&v| fmt(v)).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn read_observables(path: &Path) -> Result<Vec<ObservableRecord>> {
    let parse_err = |msg: String| Error::Parse { path: path.display().to_string(), msg };
    let file = std::fs::File::open(path)?;
    let mut lines = io::BufReader::new(file).lines();
    let header = lines.next().ok_or_else(|| parse_err("empty file".into()))??;
    if header.trim() != OBSERVABLE_COLUMNS.join(",") {
        return Err(parse_err(format!("unexpected header {header:?}")));
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let vals: Vec<f64> = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| parse_err(format!("row {}: {e}", i + 1)))?;
        if vals.len() != OBSERVABLE_COLUMNS.len() {
            return Err(parse_err(format!("row {} has {} columns", i + 1, vals.len())));
        }
        out.push(ObservableRecord {
            t_fs: vals[0],
            pop: [vals[1], vals[2]],
            coherence: vals[3],
            energy_mean: vals[4],
            energy_drift: vals[5],
            norm_dev: vals[6],
            spurious_per_fs: vals[7],
            fallback_fraction: vals[8],
        });
    }
    Ok(out)
}

pub const TRAJ_COLUMNS: &str = "t_fs,traj,r_bohr,v_au,pop0,pop1,f0,f1,energy_ha";

pub fn write_traj_rows<W: Write>(mut w: W, ens: &EnsembleState, mass: f64) -> io::Result<()> {
    let t = fmt(ens.t_fs());
    for (i, tr) in ens.trajs.iter().enumerate() {
        let p = tr.populations();
        writeln!(
            w,
            "{t},{i},{},{},{},{},{},{},{}",
            fmt(tr.r),
            fmt(tr.v),
            fmt(p[0]),
            fmt(p[1]),
            fmt(ens.f_eff[i][0]),
            fmt(ens.f_eff[i][1]),
            fmt(trajectory_energy(tr, mass))
        )?;
    }
    Ok(())
}

pub const QM_COLUMNS: &str = "t_fs,traj,p_au,tag,intercept,weight,intercept_plus,intercept_minus";

pub fn write_qm_rows<W: Write>(mut w: W, ens: &EnsembleState) -> io::Result<()> {
    let t = fmt(ens.t_fs());
    let (yp, ym) = match ens.qm.intercepts {
        qmom::Intercepts::Double { plus, minus } => (plus, minus),
        qmom::Intercepts::Single(Some(y)) => (y, y),
        _ => (f64::NAN, f64::NAN),
    };
    for i in 0..ens.n_traj() {
        writeln!(
            w,
            "{t},{i},{},{},{},{},{},{}",
            fmt(ens.qm.p[i]),
            ens.qm.tags[i].as_str(),
            fmt(ens.qm.intercept_used[i]),
            fmt(ens.qm.weights[i]),
            fmt(yp),
            fmt(ym)
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{DynamicsSettings, Method, Propagator};
    use crate::model::{adiabatic, ModelId};
    use crate::qmom::{QmParams, QmVariant, QuantumMomentumField};
    use num_complex::Complex64;

    fn traj(r: f64, v: f64, c: [f64; 2]) -> TrajectoryState {
        TrajectoryState {
            r,
            v,
            c: [Complex64::new(c[0], 0.0), Complex64::new(c[1], 0.0)],
            f_acc: [0.0; 2],
            adiab: adiabatic(ModelId::Tully1, r).unwrap(),
            force: 0.0,
            log_norm_scale: 0.0,
        }
    }

    fn ensemble(trajs: Vec<TrajectoryState>) -> EnsembleState {
        let n = trajs.len();
        EnsembleState {
            trajs,
            t: 0.0,
            step: 0,
            f_eff: vec![[0.0; 2]; n],
            qm: QuantumMomentumField::zeros((1, 0), n),
            ekin_fallback: vec![false; n],
        }
    }

    #[test]
    fn energy_examples() {
        let t = traj(0.5, 0.0, [1.0, 0.0]);
        assert_eq!(trajectory_energy(&t, 2000.0), t.adiab.e[0]);
        let t = traj(-20.0, 25.0 / 2000.0, [1.0, 0.0]);
        let ekin = trajectory_energy(&t, 2000.0) - t.adiab.e[0];
        assert!((ekin - 0.15625).abs() < 1e-15);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let mut t = traj(0.0, 0.01, [h, h]);
        t.adiab.e = [0.02, 0.02];
        assert!((trajectory_energy(&t, 2000.0) - (0.1 + 0.02)).abs() < 1e-15);
    }

    #[test]
    fn drift_examples() {
        let (d, s) = drift(&[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(d, 0.0);
        assert!(s.iter().all(|&x| x == 0.0));
        let e: Vec<f64> = (0..11).map(|i| 0.3 + 0.002 * i as f64).collect();
        let (d, s) = drift(&e).unwrap();
        assert!((d - 0.02).abs() < 1e-14);
        assert!((s[5] - 0.01).abs() < 1e-14);
        assert!(drift(&[1.0]).is_err());
    }

    #[test]
    fn coherence_limits() {
        let pure = ensemble(vec![traj(0.0, 0.0, [1.0, 0.0]), traj(1.0, 0.0, [0.0, 1.0])]);
        assert_eq!(coherence_mean(&pure), 0.0);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let mixed = ensemble(vec![traj(0.0, 0.0, [h, h]); 3]);
        assert!((coherence_mean(&mixed) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn population_sum_is_mean_norm() {
        let e = ensemble(vec![traj(0.0, 0.0, [0.9, 0.3]), traj(1.0, 0.0, [0.2, 1.01])]);
        let p = population_mean(&e);
        let norm = e.trajs.iter().map(|t| t.norm()).sum::<f64>() / 2.0;
        assert!((p[0] + p[1] - norm).abs() < 1e-15);
    }

    #[test]
    fn csv_roundtrip_is_exact() {
        let rec = ObservableRecord {
            t_fs: 1.0 / 3.0,
            pop: [0.1, 0.9],
            coherence: 0.09,
            energy_mean: -1e-300,
            energy_drift: 5e-17,
            norm_dev: 0.0,
            spurious_per_fs: -2.5e-13,
            fallback_fraction: 0.0,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("obs.csv");
        write_observables(std::fs::File::create(&path).unwrap(), &[rec.clone(), rec.clone()]).unwrap();
        let back = read_observables(&path).unwrap();
        assert_eq!(back, vec![rec.clone(), rec]);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("t_fs,pop0,pop1,coherence,energy_mean_ha,energy_drift_ha,norm_dev,spurious_per_fs,fallback_fraction\n"));
    }

    #[test]
    fn observe_bounds_on_short_run() {
        let p = Propagator::new(DynamicsSettings {
            model: ModelId::Tully1,
            method: Method::CtmqcE,
            qm: QmParams::new(QmVariant::DoubleIntercept),
            mass: 2000.0,
            dt: 0.4134,
            ekin_cutoff: 1e-6,
            reset_bo_momentum: false,
            threads: 1,
        })
        .unwrap();
        let spec = crate::sampling::WavepacketSpec { r0: -2.0, k0: 25.0, sigma_packet: 2f64.sqrt() };
        let init = crate::sampling::sample_wigner(&spec, 20, 1).unwrap();
        let mut ens = p.init(&init).unwrap();
        let e0 = energy_mean(&ens, 2000.0);
        for _ in 0..2000 {
            p.step(&mut ens).unwrap();
        }
        let r = observe(&ens, 2000.0, e0);
        assert!(r.is_finite());
        assert!(r.pop.iter().all(|&x| (0.0..=1.0).contains(&x)));
        assert!((0.0..=0.25).contains(&r.coherence));
        assert!(r.pop[1] > 0.0);
    }
}
