use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("adiabatic states degenerate at R = {r} bohr (gap {gap:e} hartree)")]
    Degenerate { r: f64, gap: f64 },

    #[error("non-finite state on trajectory {traj} at t = {t_fs:.4} fs (step {step})")]
    NonFinite { traj: usize, step: usize, t_fs: f64 },

    #[error("electronic coefficients have zero norm")]
    ZeroNorm,

    #[error("grid error: {0}")]
    Grid(String),

    #[error("wavefunction norm drifted by {drift:e} after {steps} steps")]
    NormDrift { drift: f64, steps: usize },

    #[error("malformed input {path}: {msg}")]
    Parse { path: String, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
