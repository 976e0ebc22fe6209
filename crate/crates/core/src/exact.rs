//! Split-operator propagation of the two-state nuclear wavefunction on a
//! uniform periodic grid.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::diagnostics::ObservableRecord;
use crate::error::{Error, Result};
use crate::model::{adiabatize, diabatic, DiabaticMatrix, ModelId, NSTATES};
use crate::sampling::WavepacketSpec;
use crate::units::{au_to_fs, HBAR};

/// Densities below this are skipped in the coherence integral.
pub const DENSITY_FLOOR: f64 = 1e-12;
pub const NORM_DRIFT_LIMIT: f64 = 1e-8;
pub const EDGE_AMPLITUDE_LIMIT: f64 = 1e-8;
/// Points on each side of the grid checked for edge amplitude.
pub const EDGE_POINTS: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub x_min: f64,
    pub x_max: f64,
    pub n: usize,
}

impl Default for Grid {
    fn default() -> Self {
        Grid { x_min: -40.0, x_max: 40.0, n: 4096 }
    }
}

impl Grid {
    pub fn new(x_min: f64, x_max: f64, n: usize) -> Result<Self> {
        let g = Grid { x_min, x_max, n };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.x_max > self.x_min) || !self.x_min.is_finite() || !self.x_max.is_finite() {
            return Err(Error::Grid(format!("empty interval [{}, {}]", self.x_min, self.x_max)));
        }
        if self.n < 2 * EDGE_POINTS + 2 {
            return Err(Error::Grid(format!("{} points is too few", self.n)));
        }
        Ok(())
    }

    pub fn dr(&self) -> f64 {
        (self.x_max - self.x_min) / self.n as f64
    }

    pub fn x(&self, j: usize) -> f64 {
        self.x_min + j as f64 * self.dr()
    }

    /// Angular wavenumber of FFT bin `j`.
    pub fn k(&self, j: usize) -> f64 {
        let n = self.n as isize;
        let j = j as isize;
        let jj = if j < (n + 1) / 2 { j } else { j - n };
        2.0 * PI * jj as f64 / (self.n as f64 * self.dr())
    }

    pub fn k_max(&self) -> f64 {
        PI / self.dr()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridWavefunction {
    pub grid: Grid,
    /// Diabatic components.
    pub psi: [Vec<Complex64>; NSTATES],
    /// Time in atomic units.
    pub t: f64,
}

impl GridWavefunction {
    pub fn norm(&self) -> f64 {
        let dr = self.grid.dr();
        let mut s = 0.0;
        for j in 0..self.grid.n {
            s += self.psi[0][j].norm_sqr() + self.psi[1][j].norm_sqr();
        }
        s * dr
    }

    pub fn density(&self, j: usize) -> f64 {
        self.psi[0][j].norm_sqr() + self.psi[1][j].norm_sqr()
    }

    /// Largest `|psi|` within [`EDGE_POINTS`] of either grid edge.
    pub fn edge_amplitude(&self) -> f64 {
        let n = self.grid.n;
        (0..EDGE_POINTS)
            .chain(n - EDGE_POINTS..n)
            .map(|j| self.density(j).sqrt())
            .fold(0.0, f64::max)
    }

    pub fn mean_position(&self) -> f64 {
        let dr = self.grid.dr();
        (0..self.grid.n).map(|j| self.grid.x(j) * self.density(j)).sum::<f64>() * dr / self.norm()
    }

    pub fn mean_momentum(&self) -> f64 {
        let n = self.grid.n;
        let fft = FftPlanner::new().plan_fft_forward(n);
        let mut num = 0.0;
        let mut den = 0.0;
        for comp in &self.psi {
            let mut buf = comp.clone();
            fft.process(&mut buf);
            for (j, a) in buf.iter().enumerate() {
                num += HBAR * self.grid.k(j) * a.norm_sqr();
                den += a.norm_sqr();
            }
        }
        num / den
    }
}

/// The Gaussian packet of `spec` on the lower adiabatic surface of `potential`.
pub fn init_wavepacket_with(
    spec: &WavepacketSpec,
    grid: Grid,
    potential: impl Fn(f64) -> DiabaticMatrix,
) -> Result<GridWavefunction> {
    spec.validate()?;
    grid.validate()?;
    let s = spec.sigma_packet;
    if spec.r0 - 10.0 * s < grid.x_min || spec.r0 + 10.0 * s > grid.x_max {
        return Err(Error::Grid(format!(
            "grid [{}, {}] does not contain r0 +- 10 sigma",
            grid.x_min, grid.x_max
        )));
    }
    if spec.k0.abs() + 10.0 / s > grid.k_max() {
        return Err(Error::Grid(format!(
            "grid spacing {} cannot resolve k0 = {}",
            grid.dr(),
            spec.k0
        )));
    }
    let norm = (PI * s * s).powf(-0.25);
    let mut psi = [vec![Complex64::new(0.0, 0.0); grid.n], vec![Complex64::new(0.0, 0.0); grid.n]];
    for j in 0..grid.n {
        let x = grid.x(j) - spec.r0;
        let g = Complex64::from_polar(norm * (-x * x / (2.0 * s * s)).exp(), spec.k0 * x);
        let u0 = ground_vector(&potential(grid.x(j)));
        psi[0][j] = g * u0[0];
        psi[1][j] = g * u0[1];
    }
    Ok(GridWavefunction { grid, psi, t: 0.0 })
}

pub fn init_wavepacket(spec: &WavepacketSpec, model: ModelId, grid: Grid) -> Result<GridWavefunction> {
    init_wavepacket_with(spec, grid, |r| diabatic(model, r))
}

/// Adiabatic basis, or the diabatic one where the states are degenerate.
fn local_basis(d: &DiabaticMatrix) -> [[f64; NSTATES]; NSTATES] {
    match adiabatize(d) {
        Ok(a) => a.basis,
        Err(_) if d.v11 <= d.v22 => [[1.0, 0.0], [0.0, 1.0]],
        Err(_) => [[0.0, 1.0], [1.0, 0.0]],
    }
}

fn ground_vector(d: &DiabaticMatrix) -> [f64; NSTATES] {
    local_basis(d)[0]
}

/// `exp(-i tau V)` for a real symmetric 2x2 `V`.
fn potential_propagator(d: &DiabaticMatrix, tau: f64) -> [[Complex64; 2]; 2] {
    let mean = 0.5 * (d.v11 + d.v22);
    let delta = 0.5 * (d.v11 - d.v22);
    let r = (delta * delta + d.v12 * d.v12).sqrt();
    let phase = Complex64::from_polar(1.0, -tau * mean);
    let (s, c) = (tau * r).sin_cos();
    let (nd, nc) = if r > 0.0 { (delta / r, d.v12 / r) } else { (0.0, 0.0) };
    let i = Complex64::new(0.0, 1.0);
    [
        [phase * (c - i * s * nd), phase * (-i * s * nc)],
        [phase * (-i * s * nc), phase * (c + i * s * nd)],
    ]
}

/// Exact reference observables.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExactObservables {
    pub t_fs: f64,
    pub pop: [f64; NSTATES],
    /// `int |F_0|^2 |F_1|^2 / (|F_0|^2 + |F_1|^2) dR`.
    pub coherence: f64,
    pub norm: f64,
    pub energy: f64,
}

impl ExactObservables {
    /// Same layout as the trajectory observables; `energy_ref` is the
    /// initial energy.
    pub fn to_record(&self, energy_ref: f64) -> ObservableRecord {
        ObservableRecord {
            t_fs: self.t_fs,
            pop: self.pop,
            coherence: self.coherence,
            energy_mean: self.energy,
            energy_drift: self.energy - energy_ref,
            norm_dev: (1.0 - self.norm).abs(),
            spurious_per_fs: 0.0,
            fallback_fraction: 0.0,
        }
    }
}

pub struct SplitOperator {
    grid: Grid,
    mass: f64,
    dt: f64,
    kinetic: Vec<Complex64>,
    half_potential: Vec<[[Complex64; 2]; 2]>,
    potential: Vec<DiabaticMatrix>,
    basis: Vec<[[f64; NSTATES]; NSTATES]>,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
}

impl SplitOperator {
    pub fn new(grid: Grid, mass: f64, dt: f64, potential: impl Fn(f64) -> DiabaticMatrix) -> Result<Self> {
        grid.validate()?;
        if !(mass > 0.0) || !dt.is_finite() || dt == 0.0 {
            return Err(Error::Grid("mass must be positive and dt nonzero".into()));
        }
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(grid.n);
        let ifft = planner.plan_fft_inverse(grid.n);
        let scratch_len = fft.get_inplace_scratch_len().max(ifft.get_inplace_scratch_len());
        let kinetic = (0..grid.n)
            .map(|j| {
                let k = grid.k(j);
                Complex64::from_polar(1.0, -HBAR * k * k / (2.0 * mass) * dt)
            })
            .collect();
        let potential: Vec<DiabaticMatrix> = (0..grid.n).map(|j| potential(grid.x(j))).collect();
        let half_potential = potential.iter().map(|d| potential_propagator(d, 0.5 * dt / HBAR)).collect();
        let basis = potential.iter().map(local_basis).collect();
        Ok(SplitOperator {
            grid,
            mass,
            dt,
            kinetic,
            half_potential,
            potential,
            basis,
            fft,
            ifft,
            scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
        })
    }

    pub fn for_model(model: ModelId, grid: Grid, mass: f64, dt: f64) -> Result<Self> {
        SplitOperator::new(grid, mass, dt, |r| diabatic(model, r))
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    fn apply_potential(&self, wf: &mut GridWavefunction) {
        for j in 0..self.grid.n {
            let u = &self.half_potential[j];
            let (a, b) = (wf.psi[0][j], wf.psi[1][j]);
            wf.psi[0][j] = u[0][0] * a + u[0][1] * b;
            wf.psi[1][j] = u[1][0] * a + u[1][1] * b;
        }
    }

    pub fn step(&mut self, wf: &mut GridWavefunction) {
        debug_assert_eq!(wf.grid, self.grid);
        self.apply_potential(wf);
        let scale = 1.0 / self.grid.n as f64;
        for comp in wf.psi.iter_mut() {
            self.fft.process_with_scratch(comp, &mut self.scratch);
            for (a, k) in comp.iter_mut().zip(&self.kinetic) {
                *a *= k * scale;
            }
            self.ifft.process_with_scratch(comp, &mut self.scratch);
        }
        self.apply_potential(wf);
        wf.t += self.dt;
    }

    /// `n_steps` steps, failing if the norm drifts by more than
    /// [`NORM_DRIFT_LIMIT`].
    pub fn propagate(&mut self, wf: &mut GridWavefunction, n_steps: usize) -> Result<()> {
        let n0 = wf.norm();
        for _ in 0..n_steps {
            self.step(wf);
        }
        let drift = (wf.norm() - n0).abs();
        if drift > NORM_DRIFT_LIMIT {
            return Err(Error::NormDrift { drift, steps: n_steps });
        }
        Ok(())
    }

    pub fn observables(&mut self, wf: &GridWavefunction) -> ExactObservables {
        let dr = self.grid.dr();
        let mut pop = [0.0; NSTATES];
        let mut coherence = 0.0;
        let mut potential = 0.0;
        for j in 0..self.grid.n {
            let (a, b) = (wf.psi[0][j], wf.psi[1][j]);
            let u = &self.basis[j];
            let f0 = (a * u[0][0] + b * u[0][1]).norm_sqr();
            let f1 = (a * u[1][0] + b * u[1][1]).norm_sqr();
            pop[0] += f0;
            pop[1] += f1;
            if f0 + f1 >= DENSITY_FLOOR {
                coherence += f0 * f1 / (f0 + f1);
            }
            let d = &self.potential[j];
            potential += d.v11 * a.norm_sqr() + d.v22 * b.norm_sqr() + 2.0 * d.v12 * (a.conj() * b).re;
        }
        let mut kinetic = 0.0;
        for comp in &wf.psi {
            let mut buf = comp.clone();
            self.fft.process_with_scratch(&mut buf, &mut self.scratch);
            for (j, a) in buf.iter().enumerate() {
                let k = self.grid.k(j);
                kinetic += HBAR * HBAR * k * k / (2.0 * self.mass) * a.norm_sqr();
            }
        }
        kinetic *= dr / self.grid.n as f64;
        ExactObservables {
            t_fs: au_to_fs(wf.t),
            pop: [pop[0] * dr, pop[1] * dr],
            coherence: coherence * dr,
            norm: wf.norm(),
            energy: kinetic + potential * dr,
        }
    }
}

pub fn exact_observables(op: &mut SplitOperator, wf: &GridWavefunction) -> ExactObservables {
    op.observables(wf)
}
