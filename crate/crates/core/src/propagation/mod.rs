//! Coupled evolution of guide waves and walkers.
//!
//! Real time: every guide wave takes a Crank–Nicolson step in its own frozen
//! windowed potential and its walker follows the de Broglie–Bohm velocity of
//! that wave. Imaginary time: guide waves relax under the same potentials
//! while walkers take annealed random moves, with optional birth/death
//! resampling of whole replicas.

mod imaginary;
mod prepare;
mod real_time;

pub use imaginary::{branch_resample, imaginary_time_step, ImaginaryStepReport, ImaginaryTimeOptions};
pub use prepare::{alpha_scan, prepare_ground_state, AlphaScan, PrepConfig, PrepResult, ScanRow, TracePoint};
#[cfg(test)]
pub(crate) use prepare::sample_inverse_cdf;
pub use real_time::{real_time_step, AbsorbingMask, RealTimeOptions, StepReport};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid1D, WaveFn1D};
use crate::potentials::v_ee;
use crate::potentials::SoftCoreParams;
use crate::walkers::{update_sigma, KernelConfig, WalkerCloud};

/// Relative amplitude below which a point counts as a node.
pub const AMPLITUDE_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeStepConfig {
    pub dt_real: f64,
    pub dtau_imag: f64,
    /// Length of the real-time run.
    pub t_total: f64,
    /// Longest imaginary-time preparation.
    pub tau_total: f64,
    /// e-folding time of the walker noise variance; defaults to `tau_total / 4`.
    #[serde(default)]
    pub anneal_tau: Option<f64>,
}

impl TimeStepConfig {
    pub fn anneal_tau(&self) -> f64 {
        self.anneal_tau.unwrap_or(self.tau_total / 4.0)
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("dt_real", self.dt_real),
            ("dtau_imag", self.dtau_imag),
            ("t_total", self.t_total),
            ("tau_total", self.tau_total),
            ("anneal_tau", self.anneal_tau()),
        ];
        for (name, v) in fields {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

impl Default for TimeStepConfig {
    fn default() -> Self {
        Self { dt_real: 0.02, dtau_imag: 0.02, t_total: 4.0, tau_total: 20.0, anneal_tau: None }
    }
}

/// Guide waves and walkers of all electrons. Wave `(i, k)` is stored at
/// `waves[i * m + k]` and is paired with `clouds[i].positions[k]`.
#[derive(Debug, Clone)]
pub struct EnsembleState {
    pub grid: Grid1D,
    pub waves: Vec<WaveFn1D>,
    pub clouds: Vec<WalkerCloud>,
    pub kernel: KernelConfig,
    pub t: f64,
    /// Step counter feeding the random streams.
    pub step: u64,
}

impl EnsembleState {
    pub fn new(grid: Grid1D, waves: Vec<WaveFn1D>, clouds: Vec<WalkerCloud>, kernel: KernelConfig) -> Result<Self> {
        let n_el = clouds.len();
        let m = clouds.first().map(|c| c.len()).unwrap_or(0);
        if n_el == 0 || m == 0 || clouds.iter().any(|c| c.len() != m) {
            return Err(Error::InconsistentEnsembles("clouds must be nonempty and equally sized".into()));
        }
        if waves.len() != n_el * m {
            return Err(Error::InconsistentEnsembles(format!(
                "{} waves for {n_el} electrons × {m} walkers",
                waves.len()
            )));
        }
        for w in &waves {
            grid.ensure_same(&w.grid)?;
        }
        if kernel.alpha.len() != n_el {
            return Err(Error::InconsistentEnsembles("kernel config does not match electron count".into()));
        }
        Ok(Self { grid, waves, clouds, kernel, t: 0.0, step: 0 })
    }

    #[inline]
    pub fn n_electrons(&self) -> usize {
        self.clouds.len()
    }

    #[inline]
    pub fn n_walkers(&self) -> usize {
        self.clouds[0].len()
    }

    #[inline]
    pub fn wave(&self, i: usize, k: usize) -> &WaveFn1D {
        &self.waves[i * self.n_walkers() + k]
    }

    pub fn waves_of(&self, i: usize) -> &[WaveFn1D] {
        let m = self.n_walkers();
        &self.waves[i * m..(i + 1) * m]
    }

    pub fn refresh_sigma(&mut self) -> Result<()> {
        for c in &self.clouds {
            self.kernel = update_sigma(c, &self.kernel)?;
        }
        Ok(())
    }

    /// `Σ_{i<j} v_ee(x_i^k − x_j^k)` for replica `k`.
    pub fn pair_energy(&self, k: usize, params: &SoftCoreParams) -> f64 {
        let n = self.n_electrons();
        let mut e = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                e += v_ee(self.clouds[i].positions[k] - self.clouds[j].positions[k], params);
            }
        }
        e
    }
}

/// Centered first derivative at node `i` (one-sided at the ends).
#[inline]
fn derivative_at(values: &[Complex64], i: usize, dx: f64) -> Complex64 {
    let n = values.len();
    if i == 0 {
        (values[1] - values[0]) / dx
    } else if i + 1 == n {
        (values[n - 1] - values[n - 2]) / dx
    } else {
        (values[i + 1] - values[i - 1]) / (2.0 * dx)
    }
}

fn max_amplitude(w: &WaveFn1D) -> f64 {
    w.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

/// Raw guidance velocity `Im(ψ'/ψ)` at `x` and the interpolated amplitude.
fn velocity_parts(w: &WaveFn1D, x: f64) -> Option<(f64, Complex64)> {
    let grid = &w.grid;
    let (i, t) = grid.locate(x)?;
    let dx = grid.dx();
    let psi = w.values[i] * (1.0 - t) + w.values[i + 1] * t;
    let dpsi = derivative_at(&w.values, i, dx) * (1.0 - t) + derivative_at(&w.values, i + 1, dx) * t;
    if psi.norm_sqr() == 0.0 {
        return Some((0.0, psi));
    }
    Some(((dpsi / psi).im, psi))
}

/// de Broglie–Bohm velocity `Im(ψ'/ψ)` at `x` (ħ = m = 1).
///
/// The derivative is taken by centered differences on the grid and both ψ
/// and ψ' are interpolated linearly to `x`. Points where `|ψ(x)|` falls
/// below `AMPLITUDE_FLOOR · max|ψ|` are reported as
/// [`Error::NodeProximity`].
pub fn bohmian_velocity(w: &WaveFn1D, x: f64) -> Result<f64> {
    let (v, psi) = velocity_parts(w, x).ok_or(Error::NodeProximity { x, amplitude: 0.0 })?;
    let floor = AMPLITUDE_FLOOR * max_amplitude(w);
    if psi.norm() < floor {
        return Err(Error::NodeProximity { x, amplitude: psi.norm() });
    }
    Ok(v)
}

/// Velocity used for stepping: nodes and out-of-grid points are tolerated,
/// the speed is capped at `cap`. The flag reports a node hit.
pub(crate) fn guided_velocity(w: &WaveFn1D, x: f64, cap: f64, floor: f64) -> (f64, bool) {
    match velocity_parts(w, x) {
        Some((v, psi)) => {
            let node = psi.norm() < floor;
            let v = if v.is_finite() { v.clamp(-cap, cap) } else { 0.0 };
            (v, node)
        }
        None => (0.0, true),
    }
}

/// Local energy `Re[(−½ψ'' + Vψ)/ψ]` at `x`, using the propagator's
/// three-point stencil at the bracketing nodes and linear interpolation.
pub fn local_energy(w: &WaveFn1D, potential: &[f64], x: f64) -> Result<f64> {
    let floor = AMPLITUDE_FLOOR * max_amplitude(w);
    local_energy_with_floor(w, potential, x, floor)
}

pub(crate) fn local_energy_with_floor(w: &WaveFn1D, potential: &[f64], x: f64, floor: f64) -> Result<f64> {
    let grid = &w.grid;
    let (i, t) = grid.locate(x).ok_or(Error::NodeProximity { x, amplitude: 0.0 })?;
    let psi = w.values[i] * (1.0 - t) + w.values[i + 1] * t;
    if psi.norm() < floor || psi.norm_sqr() == 0.0 {
        return Err(Error::NodeProximity { x, amplitude: psi.norm() });
    }
    let h_at = |j: usize| -> Complex64 {
        let n = w.values.len();
        let kin = 1.0 / (grid.dx() * grid.dx());
        let mut v = w.values[j] * (kin + potential[j]);
        if j > 0 {
            v -= w.values[j - 1] * (0.5 * kin);
        }
        if j + 1 < n {
            v -= w.values[j + 1] * (0.5 * kin);
        }
        v
    };
    let h_psi = h_at(i) * (1.0 - t) + h_at(i + 1) * t;
    Ok((h_psi / psi).re)
}
