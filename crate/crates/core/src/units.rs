//! Hartree atomic units. Every conversion used by the crate lives here.

/// Reduced Planck constant.
pub const HBAR: f64 = 1.0;

/// Atomic units of time in one femtosecond (CODATA 2018).
pub const AU_TIME_PER_FS: f64 = 41.341_374_575_751;

/// Atomic units of time in one attosecond.
pub const AU_TIME_PER_AS: f64 = AU_TIME_PER_FS / 1000.0;

/// Nuclear mass used for the Tully benchmarks.
pub const DEFAULT_MASS_AU: f64 = 2000.0;

pub fn fs_to_au(t_fs: f64) -> f64 {
    t_fs * AU_TIME_PER_FS
}

pub fn au_to_fs(t_au: f64) -> f64 {
    t_au / AU_TIME_PER_FS
}

pub fn as_to_au(t_as: f64) -> f64 {
    t_as * AU_TIME_PER_AS
}

/// Converts a rate in inverse atomic time units to inverse femtoseconds.
pub fn rate_au_to_per_fs(rate: f64) -> f64 {
    rate * AU_TIME_PER_FS
}
