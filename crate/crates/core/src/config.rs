//! Run configuration.
//!
//! A run is described by one JSON document. Missing keys take the defaults
//! below; optional keys that depend on the model (centroid, momentum, end
//! time, and the model IV quantum-momentum overrides) are filled in by
//! [`RunConfig::resolve`].

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::Value;

pub use crate::dynamics::Method;
use crate::dynamics::DynamicsSettings;
use crate::error::{Error, Result};
use crate::exact::Grid;
use crate::model::ModelId;
use crate::params;
use crate::qmom::{QmParams, QmVariant};
use crate::sampling::WavepacketSpec;
use crate::units::{as_to_au, au_to_fs, fs_to_au, AU_TIME_PER_FS, DEFAULT_MASS_AU};

/// Distance travelled beyond the origin before the default end time.
pub const DEFAULT_EXIT_DISTANCE_BOHR: f64 = 20.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExactConfig {
    #[serde(default = "d_x_min")]
    pub x_min_bohr: f64,
    #[serde(default = "d_x_max")]
    pub x_max_bohr: f64,
    #[serde(default = "d_points")]
    pub n_points: usize,
    #[serde(default = "d_exact_dt")]
    pub dt_au: f64,
    /// Spacing of recorded rows.
    #[serde(default = "d_record_fs")]
    pub record_interval_fs: f64,
}

impl Default for ExactConfig {
    fn default() -> Self {
        ExactConfig {
            x_min_bohr: d_x_min(),
            x_max_bohr: d_x_max(),
            n_points: d_points(),
            dt_au: d_exact_dt(),
            record_interval_fs: d_record_fs(),
        }
    }
}

impl ExactConfig {
    pub fn grid(&self) -> Grid {
        Grid { x_min: self.x_min_bohr, x_max: self.x_max_bohr, n: self.n_points }
    }

    /// Sub-steps per record and the time step that makes them fit exactly.
    pub fn schedule(&self) -> (usize, f64) {
        let interval = fs_to_au(self.record_interval_fs);
        let n = (interval / self.dt_au).ceil().max(1.0) as usize;
        (n, interval / n as f64)
    }
}

fn d_x_min() -> f64 {
    -40.0
}
fn d_x_max() -> f64 {
    40.0
}
fn d_points() -> usize {
    4096
}
fn d_exact_dt() -> f64 {
    0.1
}
fn d_record_fs() -> f64 {
    0.1
}
fn d_method() -> Method {
    Method::CtmqcE
}
fn d_variant() -> QmVariant {
    QmVariant::DoubleIntercept
}
fn d_sigma_packet() -> f64 {
    2f64.sqrt()
}
fn d_n_traj() -> usize {
    200
}
fn d_dt_as() -> f64 {
    10.0
}
fn d_stride() -> usize {
    1
}
fn d_sigma_qm() -> f64 {
    0.2f64.sqrt()
}
fn d_denom() -> f64 {
    1e-8
}
fn d_ekin() -> f64 {
    crate::energy::DEFAULT_EKIN_CUTOFF
}
fn d_mass() -> f64 {
    DEFAULT_MASS_AU
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelId,
    #[serde(default = "d_method")]
    pub method: Method,
    #[serde(default = "d_variant")]
    pub qm_variant: QmVariant,
    #[serde(default)]
    pub r0_bohr: Option<f64>,
    #[serde(default)]
    pub k0_au: Option<f64>,
    #[serde(default = "d_sigma_packet")]
    pub sigma_packet_bohr: f64,
    #[serde(default = "d_n_traj")]
    pub n_traj: usize,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub seeds: Option<Vec<u64>>,
    #[serde(default = "d_dt_as")]
    pub dt_as: f64,
    #[serde(default)]
    pub t_final_fs: Option<f64>,
    #[serde(default = "d_stride")]
    pub record_stride: usize,
    #[serde(default = "d_sigma_qm")]
    pub sigma_qm_bohr: f64,
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub cutoff_radius_sigmas: Option<f64>,
    #[serde(default = "d_denom")]
    pub denom_cutoff: f64,
    #[serde(default = "d_ekin")]
    pub ekin_cutoff_hartree: f64,
    #[serde(default = "d_mass")]
    pub mass_au: f64,
    /// Zero the accumulated BO momentum of decohered trajectories.
    #[serde(default)]
    pub reset_bo_momentum: bool,
    #[serde(default)]
    pub exact: ExactConfig,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl RunConfig {
    /// Defaults for `model`, before resolution.
    pub fn new(model: ModelId) -> Self {
        serde_json::from_value(serde_json::json!({ "model": model })).expect("defaults deserialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::config(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Applies `key=value` overrides. Values are parsed as JSON, falling
    /// back to a bare string.
    pub fn with_overrides<S: AsRef<str>>(&self, sets: &[S]) -> Result<Self> {
        let mut v = serde_json::to_value(self)?;
        for s in sets {
            let s = s.as_ref();
            let (key, raw) = s
                .split_once('=')
                .ok_or_else(|| Error::config(format!("override {s:?} is not key=value")))?;
            let value: Value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
            set_path(&mut v, key.trim(), value)?;
        }
        serde_json::from_value(v).map_err(|e| Error::config(e.to_string()))
    }

    pub fn r0(&self) -> f64 {
        self.r0_bohr.unwrap_or_else(|| params::default_r0(self.model))
    }

    pub fn k0(&self) -> f64 {
        self.k0_au.unwrap_or_else(|| params::benchmark_momenta(self.model)[1])
    }

    /// Time for the centroid to travel from `r0` to `DEFAULT_EXIT_DISTANCE_BOHR`
    /// past the origin at its initial speed.
    pub fn default_t_final_fs(&self) -> f64 {
        let speed = self.k0().abs() / self.mass_au;
        au_to_fs((self.r0().abs() + DEFAULT_EXIT_DISTANCE_BOHR) / speed)
    }

    pub fn t_final(&self) -> f64 {
        self.t_final_fs.unwrap_or_else(|| self.default_t_final_fs())
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon.unwrap_or(if self.model == ModelId::Tully4 { 0.005 } else { 0.05 })
    }

    pub fn cutoff_radius_sigmas(&self) -> f64 {
        self.cutoff_radius_sigmas
            .unwrap_or(if self.model == ModelId::Tully4 { 1000.0 } else { 10.0 })
    }

    pub fn seed_list(&self) -> Vec<u64> {
        match (&self.seeds, self.seed) {
            (Some(s), _) if !s.is_empty() => s.clone(),
            (_, Some(s)) => vec![s],
            _ => vec![0],
        }
    }

    pub fn dt_au(&self) -> f64 {
        as_to_au(self.dt_as)
    }

    pub fn n_steps(&self) -> usize {
        (self.t_final() * AU_TIME_PER_FS / self.dt_au()).round() as usize
    }

    pub fn wavepacket(&self) -> WavepacketSpec {
        WavepacketSpec { r0: self.r0(), k0: self.k0(), sigma_packet: self.sigma_packet_bohr }
    }

    pub fn qm_params(&self) -> QmParams {
        QmParams {
            sigma: self.sigma_qm_bohr,
            variant: self.qm_variant,
            epsilon: self.epsilon(),
            cutoff_radius_sigmas: self.cutoff_radius_sigmas(),
            denom_cutoff: self.denom_cutoff,
        }
    }

    pub fn dynamics(&self, threads: usize) -> DynamicsSettings {
        DynamicsSettings {
            model: self.model,
            method: self.method,
            qm: self.qm_params(),
            mass: self.mass_au,
            dt: self.dt_au(),
            ekin_cutoff: self.ekin_cutoff_hartree,
            reset_bo_momentum: self.reset_bo_momentum,
            threads,
        }
    }

    /// Fills every model-dependent default and validates the result.
    pub fn resolve(&self) -> Result<Self> {
        let mut c = self.clone();
        c.r0_bohr = Some(self.r0());
        c.k0_au = Some(self.k0());
        c.t_final_fs = Some(self.t_final());
        c.epsilon = Some(self.epsilon());
        c.cutoff_radius_sigmas = Some(self.cutoff_radius_sigmas());
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        self.wavepacket().validate()?;
        self.qm_params().validate()?;
        if self.n_traj == 0 {
            return Err(Error::config("n_traj must be at least 1"));
        }
        if !(self.dt_as > 0.0 && self.dt_as.is_finite()) {
            return Err(Error::config("dt_as must be positive"));
        }
        let t = self.t_final();
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::config("t_final_fs must be positive"));
        }
        if self.k0() == 0.0 && self.t_final_fs.is_none() {
            return Err(Error::config("t_final_fs is required when k0_au is zero"));
        }
        if self.record_stride == 0 {
            return Err(Error::config("record_stride must be at least 1"));
        }
        if !(self.mass_au > 0.0) {
            return Err(Error::config("mass_au must be positive"));
        }
        if !(self.ekin_cutoff_hartree >= 0.0) {
            return Err(Error::config("ekin_cutoff_hartree must be non-negative"));
        }
        if let Some(s) = &self.seeds {
            let mut sorted = s.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != s.len() {
                return Err(Error::config("seeds must be distinct"));
            }
        }
        if !(self.exact.dt_au > 0.0) || !(self.exact.record_interval_fs > 0.0) {
            return Err(Error::config("exact dt_au and record_interval_fs must be positive"));
        }
        self.exact.grid().validate()?;
        Ok(())
    }

    /// Value written to metadata for the quantum-momentum variant.
    pub fn qm_variant_label(&self) -> &'static str {
        if self.method.has_quantum_momentum() {
            self.qm_variant.as_str()
        } else {
            "n/a"
        }
    }
}

fn set_path(v: &mut Value, key: &str, value: Value) -> Result<()> {
    let mut cur = v;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = cur
            .as_object_mut()
            .ok_or_else(|| Error::config(format!("cannot set {key:?}")))?;
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        cur = obj.entry(part.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    Ok(())
}
