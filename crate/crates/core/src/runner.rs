//! Orchestration of runs, sweeps and comparisons, and their file output.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::{Method, RunConfig};
use crate::diagnostics::{self, ObservableRecord};
use crate::dynamics::{EnsembleState, Propagator};
use crate::error::{Error, Result};
use crate::exact::{init_wavepacket, SplitOperator, EDGE_AMPLITUDE_LIMIT};
use crate::model::{adiabatic, diabatic, ModelId};
use crate::params::MODEL_PARAMS_VERSION;
use crate::qmom::QmVariant;
use crate::sampling::sample_wigner;
use crate::VERSION;

/// Method and quantum-momentum combinations benchmarked against each other.
pub const BENCHMARK_COMBOS: [(Method, QmVariant); 6] = [
    (Method::Ctmqc, QmVariant::DoubleIntercept),
    (Method::Ctmqc, QmVariant::Regularised),
    (Method::Ctmqc, QmVariant::CutOff),
    (Method::CtmqcE, QmVariant::DoubleIntercept),
    (Method::CtmqcE, QmVariant::Regularised),
    (Method::CtmqcE, QmVariant::CutOff),
];

pub const SWEEP_DTS_AS: [f64; 6] = [50.0, 40.0, 30.0, 20.0, 10.0, 2.0];
pub const SWEEP_NTRAJ: [usize; 5] = [20, 50, 100, 200, 500];

/// Worker threads: `CTMQC_THREADS` if set, else the available parallelism.
pub fn thread_count() -> usize {
    if let Some(n) = std::env::var("CTMQC_THREADS").ok().and_then(|s| s.trim().parse::<usize>().ok()) {
        return n.max(1);
    }
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

/// A single ensemble being stepped through time.
#[derive(Debug)]
pub struct Simulation {
    cfg: RunConfig,
    seed: u64,
    prop: Propagator,
    state: EnsembleState,
    energy_ref: f64,
}

impl Simulation {
    pub fn new(cfg: &RunConfig, seed: u64) -> Result<Self> {
        Simulation::with_threads(cfg, seed, thread_count())
    }

    pub fn with_threads(cfg: &RunConfig, seed: u64, threads: usize) -> Result<Self> {
        let cfg = cfg.resolve()?;
        let init = sample_wigner(&cfg.wavepacket(), cfg.n_traj, seed)?;
        let prop = Propagator::new(cfg.dynamics(threads))?;
        let state = prop.init(&init)?;
        let energy_ref = diagnostics::energy_mean(&state, cfg.mass_au);
        Ok(Simulation { cfg, seed, prop, state, energy_ref })
    }

    pub fn config(&self) -> &RunConfig {
        &self.cfg
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn state(&self) -> &EnsembleState {
        &self.state
    }

    pub fn step(&mut self) -> Result<()> {
        self.prop.step(&mut self.state)
    }

    pub fn n_steps(&self) -> usize {
        self.cfg.n_steps()
    }

    pub fn is_finished(&self) -> bool {
        self.state.step >= self.n_steps()
    }

    pub fn observe(&self) -> ObservableRecord {
        diagnostics::observe(&self.state, self.cfg.mass_au, self.energy_ref)
    }
}

/// Runs to the configured end time, calling `on_record` at every recorded
/// step (the first, every `record_stride`-th and the last).
pub fn simulate_with(
    sim: &mut Simulation,
    mut on_record: impl FnMut(&Simulation) -> Result<()>,
) -> Result<Vec<ObservableRecord>> {
    let stride = sim.cfg.record_stride;
    let n = sim.n_steps();
    let mut out = vec![sim.observe()];
    on_record(sim)?;
    while !sim.is_finished() {
        sim.step()?;
        let s = sim.state.step;
        if s % stride == 0 || s == n {
            out.push(sim.observe());
            on_record(sim)?;
        }
    }
    Ok(out)
}

pub fn simulate(cfg: &RunConfig, seed: u64) -> Result<Vec<ObservableRecord>> {
    let mut sim = Simulation::new(cfg, seed)?;
    simulate_with(&mut sim, |_| Ok(()))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct DumpOptions {
    pub qm: bool,
    pub traj: bool,
    pub model_curves: bool,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn write_json(path: &Path, v: &impl Serialize) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, v)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn run_metadata(cfg: &RunConfig, seed: u64, records: usize) -> serde_json::Value {
    json!({
        "version": VERSION,
        "model_params": MODEL_PARAMS_VERSION,
        "seed": seed,
        "method": cfg.method,
        "qm_variant": cfg.qm_variant_label(),
        "dt_au": cfg.dt_au(),
        "n_steps": cfg.n_steps(),
        "records": records,
        "config": cfg,
    })
}

/// Runs every configured seed and writes its outputs. With more than one
/// seed each gets a `seed_<n>` subdirectory of `out`.
pub fn run(cfg: &RunConfig, out: &Path, dumps: DumpOptions) -> Result<Vec<PathBuf>> {
    let cfg = cfg.resolve()?;
    fs::create_dir_all(out)?;
    if dumps.model_curves {
        write_json(&out.join("model_curves.json"), &model_curves())?;
    }
    let seeds = cfg.seed_list();
    let mut dirs = Vec::new();
    for &seed in &seeds {
        let dir = if seeds.len() > 1 { out.join(format!("seed_{seed}")) } else { out.to_path_buf() };
        fs::create_dir_all(&dir)?;
        let mut traj = if dumps.traj {
            let mut w = create(&dir.join("traj.csv"))?;
            writeln!(w, "{}", diagnostics::TRAJ_COLUMNS)?;
            Some(w)
        } else {
            None
        };
        let mut qm = if dumps.qm {
            let mut w = create(&dir.join("qm.csv"))?;
            writeln!(w, "{}", diagnostics::QM_COLUMNS)?;
            Some(w)
        } else {
            None
        };
        let mut sim = Simulation::new(&cfg, seed)?;
        let mass = cfg.mass_au;
        let records = simulate_with(&mut sim, |s| {
            if let Some(w) = traj.as_mut() {
                diagnostics::write_traj_rows(w, s.state(), mass)?;
            }
            if let Some(w) = qm.as_mut() {
                diagnostics::write_qm_rows(w, s.state())?;
            }
            Ok(())
        })?;
        for w in [traj.as_mut(), qm.as_mut()].into_iter().flatten() {
            w.flush()?;
        }
        let mut w = create(&dir.join("observables.csv"))?;
        diagnostics::write_observables(&mut w, &records)?;
        w.flush()?;
        write_json(&dir.join("meta.json"), &run_metadata(&cfg, seed, records.len()))?;
        dirs.push(dir);
    }
    Ok(dirs)
}

/// Potential curves of every model for plotting.
pub fn model_curves() -> serde_json::Value {
    let mut models = serde_json::Map::new();
    for model in ModelId::ALL {
        let n = 481;
        let (lo, hi) = (-12.0, 12.0);
        let mut cols: [Vec<f64>; 7] = Default::default();
        for i in 0..n {
            let r = lo + (hi - lo) * i as f64 / (n - 1) as f64;
            let d = diabatic(model, r);
            let a = adiabatic(model, r).expect("models are non-degenerate");
            for (c, v) in cols.iter_mut().zip([r, d.v11, d.v22, d.v12, a.e[0], a.e[1], a.nacv[0][1]]) {
                c.push(v);
            }
        }
        let [r, v11, v22, v12, e0, e1, d01] = cols;
        models.insert(
            model.as_str().into(),
            json!({ "r_bohr": r, "v11": v11, "v22": v22, "v12": v12, "e0": e0, "e1": e1, "d01": d01 }),
        );
    }
    json!({ "model_params": MODEL_PARAMS_VERSION, "units": "hartree, bohr", "models": models })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExactRun {
    pub records: Vec<ObservableRecord>,
    /// Time the run stopped early because amplitude reached the grid edge.
    pub truncated_at_fs: Option<f64>,
    pub dt_au: f64,
}

/// Grid reference for the wavepacket of `cfg`, up to its end time.
pub fn exact_simulate(cfg: &RunConfig) -> Result<ExactRun> {
    let cfg = cfg.resolve()?;
    let grid = cfg.exact.grid();
    let (sub, dt) = cfg.exact.schedule();
    let mut wf = init_wavepacket(&cfg.wavepacket(), cfg.model, grid)?;
    let mut op = SplitOperator::for_model(cfg.model, grid, cfg.mass_au, dt)?;
    let first = op.observables(&wf);
    let e0 = first.energy;
    let mut records = vec![first.to_record(e0)];
    let n_records = (cfg.t_final() / cfg.exact.record_interval_fs).round() as usize;
    let mut truncated_at_fs = None;
    for _ in 0..n_records {
        op.propagate(&mut wf, sub)?;
        if wf.edge_amplitude() > EDGE_AMPLITUDE_LIMIT {
            truncated_at_fs = Some(crate::units::au_to_fs(wf.t));
            break;
        }
        records.push(op.observables(&wf).to_record(e0));
    }
    Ok(ExactRun { records, truncated_at_fs, dt_au: dt })
}

pub fn exact(cfg: &RunConfig, out: &Path) -> Result<ExactRun> {
    let cfg = cfg.resolve()?;
    fs::create_dir_all(out)?;
    let run = exact_simulate(&cfg)?;
    let mut w = create(&out.join("observables.csv"))?;
    diagnostics::write_observables(&mut w, &run.records)?;
    w.flush()?;
    let meta = json!({
        "version": VERSION,
        "model_params": MODEL_PARAMS_VERSION,
        "method": "exact",
        "qm_variant": "n/a",
        "dt_au": run.dt_au,
        "records": run.records.len(),
        "truncated_at_fs": run.truncated_at_fs,
        "config": cfg,
    });
    write_json(&out.join("meta.json"), &meta)?;
    Ok(run)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepDtSample {
    pub method: Method,
    pub qm_variant: QmVariant,
    pub dt_as: f64,
    pub seed: u64,
    pub norm_dev: f64,
    pub abs_energy_drift: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepDtRow {
    pub method: Method,
    pub qm_variant: QmVariant,
    pub dt_as: f64,
    pub n_seeds: usize,
    pub norm_dev_mean: f64,
    pub norm_dev_std: f64,
    pub abs_energy_drift_mean: f64,
    pub abs_energy_drift_std: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepDtReport {
    pub samples: Vec<SweepDtSample>,
    pub rows: Vec<SweepDtRow>,
}

impl SweepDtReport {
    pub fn row(&self, method: Method, variant: QmVariant, dt_as: f64) -> Option<&SweepDtRow> {
        self.rows
            .iter()
            .find(|r| r.method == method && r.qm_variant == variant && r.dt_as == dt_as)
    }
}

/// Mean and sample standard deviation (zero for a single value).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Final norm deviation and |Delta E_sim| for each combination, time step
/// and seed of `cfg`.
pub fn sweep_dt(cfg: &RunConfig, dts: &[f64], combos: &[(Method, QmVariant)]) -> Result<SweepDtReport> {
    let mut samples = Vec::new();
    let mut rows = Vec::new();
    for &(method, variant) in combos {
        for &dt in dts {
            let mut c = cfg.clone();
            c.method = method;
            c.qm_variant = variant;
            c.dt_as = dt;
            c.record_stride = usize::MAX;
            let mut norms = Vec::new();
            let mut drifts = Vec::new();
            for seed in cfg.seed_list() {
                let rec = simulate(&c, seed)?;
                let energies: Vec<f64> = rec.iter().map(|r| r.energy_mean).collect();
                let (de, _) = diagnostics::drift(&energies)?;
                let last = rec.last().expect("at least one record");
                norms.push(last.norm_dev);
                drifts.push(de.abs());
                samples.push(SweepDtSample {
                    method,
                    qm_variant: variant,
                    dt_as: dt,
                    seed,
                    norm_dev: last.norm_dev,
                    abs_energy_drift: de.abs(),
                });
            }
            let (nm, ns) = mean_std(&norms);
            let (em, es) = mean_std(&drifts);
            rows.push(SweepDtRow {
                method,
                qm_variant: variant,
                dt_as: dt,
                n_seeds: norms.len(),
                norm_dev_mean: nm,
                norm_dev_std: ns,
                abs_energy_drift_mean: em,
                abs_energy_drift_std: es,
            });
        }
    }
    Ok(SweepDtReport { samples, rows })
}

pub fn write_sweep_dt(report: &SweepDtReport, out: &Path) -> Result<()> {
    fs::create_dir_all(out)?;
    let mut w = create(&out.join("sweep_dt.csv"))?;
    writeln!(w, "method,qm_variant,dt_as,n_seeds,norm_dev_mean,norm_dev_std,abs_energy_drift_mean,abs_energy_drift_std")?;
    for r in &report.rows {
        writeln!(
            w,
            "{},{},{:.16e},{},{:.16e},{:.16e},{:.16e},{:.16e}",
            r.method,
            r.qm_variant.as_str(),
            r.dt_as,
            r.n_seeds,
            r.norm_dev_mean,
            r.norm_dev_std,
            r.abs_energy_drift_mean,
            r.abs_energy_drift_std
        )?;
    }
    w.flush()?;
    let mut w = create(&out.join("sweep_dt_samples.csv"))?;
    writeln!(w, "method,qm_variant,dt_as,seed,norm_dev,abs_energy_drift_ha")?;
    for s in &report.samples {
        writeln!(
            w,
            "{},{},{:.16e},{},{:.16e},{:.16e}",
            s.method,
            s.qm_variant.as_str(),
            s.dt_as,
            s.seed,
            s.norm_dev,
            s.abs_energy_drift
        )?;
    }
    w.flush()?;
    write_json(&out.join("sweep_dt.json"), report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NtrajEntry {
    pub n_traj: usize,
    pub records: Vec<ObservableRecord>,
    /// Max over time of the ground population deviation from the reference.
    pub max_pop_dev: f64,
    pub max_coherence_dev: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NtrajReport {
    pub reference_n_traj: usize,
    pub entries: Vec<NtrajEntry>,
}

impl NtrajReport {
    pub fn entry(&self, n: usize) -> Option<&NtrajEntry> {
        self.entries.iter().find(|e| e.n_traj == n)
    }
}

/// Largest pointwise differences of (pop0, coherence) between two series
/// recorded on the same time grid.
pub fn max_deviation(a: &[ObservableRecord], b: &[ObservableRecord]) -> (f64, f64) {
    a.iter().zip(b).fold((0.0f64, 0.0f64), |(p, c), (x, y)| {
        (p.max((x.pop[0] - y.pop[0]).abs()), c.max((x.coherence - y.coherence).abs()))
    })
}

/// Runs `cfg` at each ensemble size and compares against the largest.
pub fn sweep_ntraj(cfg: &RunConfig, counts: &[usize]) -> Result<NtrajReport> {
    let reference_n_traj = *counts.iter().max().ok_or_else(|| Error::config("no trajectory counts"))?;
    let seed = cfg.seed_list()[0];
    let mut runs = Vec::new();
    for &n in counts {
        let mut c = cfg.clone();
        c.n_traj = n;
        runs.push((n, simulate(&c, seed)?));
    }
    let reference = runs.iter().find(|(n, _)| *n == reference_n_traj).unwrap().1.clone();
    let entries = runs
        .into_iter()
        .map(|(n, records)| {
            let (max_pop_dev, max_coherence_dev) = max_deviation(&records, &reference);
            NtrajEntry { n_traj: n, records, max_pop_dev, max_coherence_dev }
        })
        .collect();
    Ok(NtrajReport { reference_n_traj, entries })
}

pub fn write_sweep_ntraj(report: &NtrajReport, out: &Path) -> Result<()> {
    fs::create_dir_all(out)?;
    let mut w = create(&out.join("sweep_ntraj.csv"))?;
    writeln!(w, "n_traj,max_pop_dev,max_coherence_dev")?;
    for e in &report.entries {
        writeln!(w, "{},{:.16e},{:.16e}", e.n_traj, e.max_pop_dev, e.max_coherence_dev)?;
        let mut o = create(&out.join(format!("observables_n{}.csv", e.n_traj)))?;
        diagnostics::write_observables(&mut o, &e.records)?;
        o.flush()?;
    }
    w.flush()
        .map_err(Error::from)?;
    let summary = json!({
        "reference_n_traj": report.reference_n_traj,
        "entries": report.entries.iter().map(|e| json!({
            "n_traj": e.n_traj,
            "max_pop_dev": e.max_pop_dev,
            "max_coherence_dev": e.max_coherence_dev,
        })).collect::<Vec<_>>(),
    });
    write_json(&out.join("sweep_ntraj.json"), &summary)
}

/// Linear interpolation of `series` at `t_fs`; `None` outside its range.
pub fn interpolate(series: &[ObservableRecord], t_fs: f64) -> Option<ObservableRecord> {
    let first = series.first()?;
    let last = series.last()?;
    let tol = 1e-9;
    if t_fs < first.t_fs - tol || t_fs > last.t_fs + tol {
        return None;
    }
    let i = series.partition_point(|r| r.t_fs < t_fs);
    if i == 0 {
        return Some(first.clone());
    }
    if i >= series.len() {
        return Some(last.clone());
    }
    let (a, b) = (&series[i - 1], &series[i]);
    let w = if b.t_fs > a.t_fs { (t_fs - a.t_fs) / (b.t_fs - a.t_fs) } else { 0.0 };
    let lerp = |x: f64, y: f64| x + w * (y - x);
    Some(ObservableRecord {
        t_fs,
        pop: [lerp(a.pop[0], b.pop[0]), lerp(a.pop[1], b.pop[1])],
        coherence: lerp(a.coherence, b.coherence),
        energy_mean: lerp(a.energy_mean, b.energy_mean),
        energy_drift: lerp(a.energy_drift, b.energy_drift),
        norm_dev: lerp(a.norm_dev, b.norm_dev),
        spurious_per_fs: lerp(a.spurious_per_fs, b.spurious_per_fs),
        fallback_fraction: lerp(a.fallback_fraction, b.fallback_fraction),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Deviation {
    pub max_pop0: f64,
    pub final_pop0: f64,
    pub max_coherence: f64,
    pub final_coherence: f64,
    /// Time of the last aligned point.
    pub final_t_fs: f64,
    pub aligned_points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareEntry {
    pub dir: PathBuf,
    pub method: String,
    pub qm_variant: String,
    pub final_pop0: f64,
    pub final_coherence: f64,
    pub vs_reference: Option<Deviation>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub reference: Option<PathBuf>,
    pub entries: Vec<CompareEntry>,
    /// `t_fs` and per-entry (pop0, coherence) on the first run's time grid.
    pub aligned: serde_json::Value,
}

/// Deviation of `run` from `reference`, evaluated at the run's times.
pub fn deviation(run: &[ObservableRecord], reference: &[ObservableRecord]) -> Option<Deviation> {
    let mut d = Deviation {
        max_pop0: 0.0,
        final_pop0: 0.0,
        max_coherence: 0.0,
        final_coherence: 0.0,
        final_t_fs: f64::NAN,
        aligned_points: 0,
    };
    for r in run {
        let Some(x) = interpolate(reference, r.t_fs) else { continue };
        let dp = (r.pop[0] - x.pop[0]).abs();
        let dc = (r.coherence - x.coherence).abs();
        d.max_pop0 = d.max_pop0.max(dp);
        d.max_coherence = d.max_coherence.max(dc);
        d.final_pop0 = dp;
        d.final_coherence = dc;
        d.final_t_fs = r.t_fs;
        d.aligned_points += 1;
    }
    (d.aligned_points > 0).then_some(d)
}

fn read_meta(dir: &Path) -> Result<serde_json::Value> {
    let path = dir.join("meta.json");
    let text = fs::read_to_string(&path)?;
    serde_json::from_str(&text).map_err(|e| Error::Parse { path: path.display().to_string(), msg: e.to_string() })
}

pub fn compare(run_dirs: &[PathBuf], reference: Option<&Path>) -> Result<CompareReport> {
    let reference_records = match reference {
        Some(d) => Some(diagnostics::read_observables(&d.join("observables.csv"))?),
        None => None,
    };
    let mut entries = Vec::new();
    let mut series = Vec::new();
    for dir in run_dirs {
        let records = diagnostics::read_observables(&dir.join("observables.csv"))?;
        let meta = read_meta(dir)?;
        let last = records.last().ok_or_else(|| Error::Parse {
            path: dir.display().to_string(),
            msg: "no records".into(),
        })?;
        entries.push(CompareEntry {
            dir: dir.clone(),
            method: meta["method"].as_str().unwrap_or("unknown").to_string(),
            qm_variant: meta["qm_variant"].as_str().unwrap_or("unknown").to_string(),
            final_pop0: last.pop[0],
            final_coherence: last.coherence,
            vs_reference: reference_records.as_ref().and_then(|r| deviation(&records, r)),
        });
        series.push(records);
    }
    let times: Vec<f64> = series.first().map(|s| s.iter().map(|r| r.t_fs).collect()).unwrap_or_default();
    let column = |s: &[ObservableRecord], f: fn(&ObservableRecord) -> f64| -> Vec<Option<f64>> {
        times.iter().map(|&t| interpolate(s, t).map(|r| f(&r))).collect()
    };
    let mut aligned = serde_json::Map::new();
    aligned.insert("t_fs".into(), json!(times));
    for (i, s) in series.iter().enumerate() {
        aligned.insert(format!("pop0_{i}"), json!(column(s, |r| r.pop[0])));
        aligned.insert(format!("coherence_{i}"), json!(column(s, |r| r.coherence)));
    }
    if let Some(r) = &reference_records {
        aligned.insert("pop0_reference".into(), json!(column(r, |r| r.pop[0])));
        aligned.insert("coherence_reference".into(), json!(column(r, |r| r.coherence)));
    }
    Ok(CompareReport {
        reference: reference.map(Path::to_path_buf),
        entries,
        aligned: serde_json::Value::Object(aligned),
    })
}

pub fn write_compare(report: &CompareReport, out: &Path) -> Result<()> {
    if let Some(parent) = out.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    write_json(out, report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick(model: ModelId) -> RunConfig {
        RunConfig::new(model)
            .with_overrides(&["n_traj=8", "t_final_fs=2", "dt_as=50", "record_stride=4"])
            .unwrap()
    }

    #[test]
    fn row_count_contract() {
        let c = quick(ModelId::Tully1);
        let rec = simulate(&c, 1).unwrap();
        let n = c.resolve().unwrap().n_steps();
        assert_eq!(rec.len(), n.div_ceil(4) + 1);
        assert_eq!(rec[0].t_fs, 0.0);
        assert!((rec.last().unwrap().t_fs - 2.0).abs() < 0.05);
    }

    #[test]
    fn threads_do_not_change_records() {
        let c = quick(ModelId::Tully2);
        let mut a = Simulation::with_threads(&c, 3, 1).unwrap();
        let mut b = Simulation::with_threads(&c, 3, 4).unwrap();
        let ra = simulate_with(&mut a, |_| Ok(())).unwrap();
        let rb = simulate_with(&mut b, |_| Ok(())).unwrap();
        assert_eq!(ra, rb);
    }

    #[test]
    fn interpolation() {
        let mk = |t: f64, p: f64| ObservableRecord {
            t_fs: t,
            pop: [p, 1.0 - p],
            coherence: 0.0,
            energy_mean: 0.0,
            energy_drift: 0.0,
            norm_dev: 0.0,
            spurious_per_fs: 0.0,
            fallback_fraction: 0.0,
        };
        let s = vec![mk(0.0, 1.0), mk(1.0, 0.5), mk(2.0, 0.5)];
        assert!((interpolate(&s, 0.5).unwrap().pop[0] - 0.75).abs() < 1e-15);
        assert_eq!(interpolate(&s, 2.0).unwrap().pop[0], 0.5);
        assert!(interpolate(&s, 2.5).is_none());
        let d = deviation(&s, &s).unwrap();
        assert_eq!((d.max_pop0, d.max_coherence), (0.0, 0.0));
    }

    #[test]
    fn mean_std_single() {
        assert_eq!(mean_std(&[2.0]), (2.0, 0.0));
        let (m, s) = mean_std(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn model_curves_cover_all_models() {
        let v = model_curves();
        for m in ModelId::ALL {
            let e0 = v["models"][m.as_str()]["e0"].as_array().unwrap();
            assert_eq!(e0.len(), 481);
        }
    }
}
