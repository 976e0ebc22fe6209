//! C ABI over the `ctmqc` simulator.
//!
//! Simulations are opaque handles created by [`ctmqc_simulation_new`] and
//! released with [`ctmqc_simulation_free`]. Every fallible call returns a
//! [`CtmqcStatus`]; on failure a description is available from
//! [`ctmqc_last_error_message`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use ctmqc::model::{adiabatic, ModelId};
use ctmqc::{Error, RunConfig, Simulation};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CtmqcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidConfig = 3,
    NumericalFailure = 4,
    OutOfRange = 5,
    Panic = 6,
}

/// Opaque simulation handle.
pub struct CtmqcSimulation {
    inner: Simulation,
}

/// Trajectory-averaged observables at the current time.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CtmqcObservables {
    pub t_fs: f64,
    pub pop0: f64,
    pub pop1: f64,
    pub coherence: f64,
    pub energy_mean_ha: f64,
    pub energy_drift_ha: f64,
    pub norm_dev: f64,
    pub spurious_per_fs: f64,
    pub fallback_fraction: f64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CtmqcTrajectory {
    pub r_bohr: f64,
    pub v_au: f64,
    pub pop0: f64,
    pub pop1: f64,
    /// BO momenta entering the coupling terms.
    pub f0: f64,
    pub f1: f64,
    pub quantum_momentum: f64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CtmqcAdiabatic {
    pub e0: f64,
    pub e1: f64,
    pub grad_e0: f64,
    pub grad_e1: f64,
    pub d01: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn fail(status: CtmqcStatus, msg: impl Into<String>) -> CtmqcStatus {
    set_error(msg);
    status
}

fn status_of(e: &Error) -> CtmqcStatus {
    match e {
        Error::Config(_) | Error::Grid(_) | Error::Parse { .. } | Error::Json(_) => CtmqcStatus::InvalidConfig,
        _ => CtmqcStatus::NumericalFailure,
    }
}

fn guard(f: impl FnOnce() -> CtmqcStatus) -> CtmqcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(CtmqcStatus::Panic, msg)
        }
    }
}

unsafe fn read_str<'a>(p: *const c_char) -> Result<&'a str, CtmqcStatus> {
    if p.is_null() {
        return Err(fail(CtmqcStatus::NullPointer, "null string"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| fail(CtmqcStatus::InvalidUtf8, e.to_string()))
}

/// Library version, a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ctmqc_version() -> *const c_char {
    static V: &str = concat!("ctmqc ", env!("CARGO_PKG_VERSION"), "\0");
    V.as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ctmqc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |s| s.as_ptr()))
}

/// Creates a simulation from a JSON run configuration.
///
/// # Safety
/// `config_json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ctmqc_simulation_new(
    config_json: *const c_char,
    seed: u64,
    out: *mut *mut CtmqcSimulation,
) -> CtmqcStatus {
    guard(|| {
        if out.is_null() {
            return fail(CtmqcStatus::NullPointer, "null output pointer");
        }
        *out = std::ptr::null_mut();
        let text = match read_str(config_json) {
            Ok(t) => t,
            Err(s) => return s,
        };
        let sim = RunConfig::from_json(text).and_then(|cfg| Simulation::new(&cfg, seed));
        match sim {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(CtmqcSimulation { inner }));
                CtmqcStatus::Ok
            }
            Err(e) => fail(status_of(&e), e.to_string()),
        }
    })
}

/// # Safety
/// `sim` must come from [`ctmqc_simulation_new`] and not be used afterwards.
/// NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn ctmqc_simulation_free(sim: *mut CtmqcSimulation) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

unsafe fn with_sim<'a>(sim: *mut CtmqcSimulation) -> Result<&'a mut Simulation, CtmqcStatus> {
    sim.as_mut()
        .map(|s| &mut s.inner)
        .ok_or_else(|| fail(CtmqcStatus::NullPointer, "null simulation"))
}

/// Advances by `n_steps` time steps.
///
/// # Safety
/// `sim` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ctmqc_simulation_step(sim: *mut CtmqcSimulation, n_steps: u64) -> CtmqcStatus {
    guard(|| {
        let s = match with_sim(sim) {
            Ok(s) => s,
            Err(st) => return st,
        };
        for _ in 0..n_steps {
            if let Err(e) = s.step() {
                return fail(status_of(&e), e.to_string());
            }
        }
        CtmqcStatus::Ok
    })
}

/// Steps until the configured end time.
///
/// # Safety
/// `sim` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ctmqc_simulation_run_to_end(sim: *mut CtmqcSimulation) -> CtmqcStatus {
    guard(|| {
        let s = match with_sim(sim) {
            Ok(s) => s,
            Err(st) => return st,
        };
        while !s.is_finished() {
            if let Err(e) = s.step() {
                return fail(status_of(&e), e.to_string());
            }
        }
        CtmqcStatus::Ok
    })
}

/// # Safety
/// `sim` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ctmqc_simulation_observables(
    sim: *mut CtmqcSimulation,
    out: *mut CtmqcObservables,
) -> CtmqcStatus {
    guard(|| {
        let s = match with_sim(sim) {
            Ok(s) => s,
            Err(st) => return st,
        };
        if out.is_null() {
            return fail(CtmqcStatus::NullPointer, "null output pointer");
        }
        let r = s.observe();
        *out = CtmqcObservables {
            t_fs: r.t_fs,
            pop0: r.pop[0],
            pop1: r.pop[1],
            coherence: r.coherence,
            energy_mean_ha: r.energy_mean,
            energy_drift_ha: r.energy_drift,
            norm_dev: r.norm_dev,
            spurious_per_fs: r.spurious_per_fs,
            fallback_fraction: r.fallback_fraction,
        };
        CtmqcStatus::Ok
    })
}

/// # Safety
/// `sim` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ctmqc_simulation_trajectory(
    sim: *mut CtmqcSimulation,
    index: usize,
    out: *mut CtmqcTrajectory,
) -> CtmqcStatus {
    guard(|| {
        let s = match with_sim(sim) {
            Ok(s) => s,
            Err(st) => return st,
        };
        if out.is_null() {
            return fail(CtmqcStatus::NullPointer, "null output pointer");
        }
        let ens = s.state();
        let Some(t) = ens.trajs.get(index) else {
            return fail(CtmqcStatus::OutOfRange, format!("trajectory {index} of {}", ens.n_traj()));
        };
        let p = t.populations();
        *out = CtmqcTrajectory {
            r_bohr: t.r,
            v_au: t.v,
            pop0: p[0],
            pop1: p[1],
            f0: ens.f_eff[index][0],
            f1: ens.f_eff[index][1],
            quantum_momentum: ens.qm.p[index],
        };
        CtmqcStatus::Ok
    })
}

/// # Safety
/// `sim` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ctmqc_simulation_time_fs(sim: *mut CtmqcSimulation, out: *mut f64) -> CtmqcStatus {
    guard(|| match (with_sim(sim), out.is_null()) {
        (Err(st), _) => st,
        (_, true) => fail(CtmqcStatus::NullPointer, "null output pointer"),
        (Ok(s), false) => {
            *out = s.state().t_fs();
            CtmqcStatus::Ok
        }
    })
}

/// # Safety
/// `sim` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ctmqc_simulation_n_traj(sim: *mut CtmqcSimulation, out: *mut usize) -> CtmqcStatus {
    guard(|| match (with_sim(sim), out.is_null()) {
        (Err(st), _) => st,
        (_, true) => fail(CtmqcStatus::NullPointer, "null output pointer"),
        (Ok(s), false) => {
            *out = s.state().n_traj();
            CtmqcStatus::Ok
        }
    })
}

/// Adiabatic energies, gradients and coupling of a model at `r_bohr`.
///
/// # Safety
/// `model` must be a NUL-terminated string and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ctmqc_model_adiabatic(
    model: *const c_char,
    r_bohr: f64,
    out: *mut CtmqcAdiabatic,
) -> CtmqcStatus {
    guard(|| {
        if out.is_null() {
            return fail(CtmqcStatus::NullPointer, "null output pointer");
        }
        let name = match read_str(model) {
            Ok(t) => t,
            Err(s) => return s,
        };
        let id: ModelId = match name.parse() {
            Ok(m) => m,
            Err(e) => return fail(CtmqcStatus::InvalidConfig, format!("{e}")),
        };
        if !r_bohr.is_finite() {
            return fail(CtmqcStatus::OutOfRange, "position must be finite");
        }
        match adiabatic(id, r_bohr) {
            Ok(a) => {
                *out = CtmqcAdiabatic {
                    e0: a.e[0],
                    e1: a.e[1],
                    grad_e0: a.grad_e[0],
                    grad_e1: a.grad_e[1],
                    d01: a.nacv[0][1],
                };
                CtmqcStatus::Ok
            }
            Err(e) => fail(status_of(&e), e.to_string()),
        }
    })
}
