use num_complex::Complex64;

use super::{guided_velocity, max_amplitude, EnsembleState, AMPLITUDE_FLOOR};
use crate::error::Result;
use crate::grid::{Grid1D, WaveFn1D};
use crate::onebody::nuclear_potential;
use crate::par;
use crate::potentials::{field_at, LaserPulse, SoftCoreParams};
use crate::tridiag::CnWorkspace;
use crate::walkers::effective_potentials_all;

/// Multiplicative `cos^{1/8}` absorber over the outer part of the box.
#[derive(Debug, Clone, PartialEq)]
pub struct AbsorbingMask {
    pub values: Vec<f64>,
}

impl AbsorbingMask {
    /// Absorber occupying `fraction` of the half-width on each side.
    pub fn cos_eighth(grid: &Grid1D, fraction: f64) -> Self {
        let center = 0.5 * (grid.x_min() + grid.x_max());
        let half = 0.5 * (grid.x_max() - grid.x_min());
        let start = half * (1.0 - fraction);
        let values = grid
            .points()
            .map(|x| {
                let r = (x - center).abs();
                if r <= start || fraction <= 0.0 {
                    1.0
                } else {
                    let s = ((r - start) / (half - start)).min(1.0);
                    (0.5 * std::f64::consts::PI * s).cos().max(0.0).powf(0.125)
                }
            })
            .collect();
        Self { values }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RealTimeOptions {
    pub dt: f64,
    /// Refresh the cloud spreads every `sigma_stride` steps.
    pub sigma_stride: usize,
    pub mask: Option<AbsorbingMask>,
}

impl RealTimeOptions {
    pub fn new(dt: f64) -> Self {
        Self { dt, sigma_stride: 1, mask: None }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepReport {
    /// Walkers that sat on (near) a node of their guide wave during the step.
    pub node_events: usize,
}

/// Advances every guide wave by one Crank–Nicolson step in its own frozen
/// potential and moves each walker with the midpoint rule along its wave's
/// guidance velocity. With `dt = 0` the state is left untouched.
pub fn real_time_step(
    state: &mut EnsembleState,
    pulse: Option<&LaserPulse>,
    params: &SoftCoreParams,
    opts: &RealTimeOptions,
) -> Result<StepReport> {
    let dt = opts.dt;
    if dt == 0.0 {
        return Ok(StepReport::default());
    }
    let grid = state.grid;
    let m = state.n_walkers();
    let veff = effective_potentials_all(&grid, &state.clouds, &state.kernel, params)?;
    let t_mid = state.t + 0.5 * dt;
    let field = pulse.map(|p| field_at(t_mid, p)).unwrap_or(0.0);
    let base: Vec<f64> = nuclear_potential(&grid, params)
        .into_iter()
        .zip(grid.points())
        .map(|(v, x)| v - x * field)
        .collect();
    let cap = grid.dx() / dt.abs();
    let z = Complex64::new(0.0, 0.5 * dt);
    let positions: Vec<f64> = state.clouds.iter().flat_map(|c| c.positions.iter().cloned()).collect();
    let mask = opts.mask.as_ref();

    let mut jobs: Vec<(&mut WaveFn1D, Result<(f64, bool)>)> =
        state.waves.iter_mut().map(|w| (w, Ok((0.0, false)))).collect();
    par::for_each_mut(&mut jobs, |idx, (wave, out)| {
        let (i, k) = (idx / m, idx % m);
        let pot: Vec<f64> = base.iter().zip(&veff[i][k]).map(|(a, b)| a + b).collect();
        *out = advance_replica(wave, &pot, positions[idx], dt, cap, z, mask);
    });
    let moved = jobs.into_iter().map(|(_, r)| r).collect::<Result<Vec<_>>>()?;

    let mut report = StepReport::default();
    for (idx, (x, node)) in moved.into_iter().enumerate() {
        state.clouds[idx / m].positions[idx % m] = x;
        report.node_events += node as usize;
    }
    if report.node_events > 0 {
        log::debug!("t = {:.3}: {} walkers near guide-wave nodes", state.t, report.node_events);
    }
    state.t += dt;
    state.step += 1;
    if opts.sigma_stride > 0 && state.step.is_multiple_of(opts.sigma_stride as u64) {
        state.refresh_sigma()?;
    }
    Ok(report)
}

/// One wave's CN step plus its walker's midpoint move. The midpoint wave is
/// the CN average of the old and new values.
fn advance_replica(
    wave: &mut WaveFn1D,
    potential: &[f64],
    x: f64,
    dt: f64,
    cap: f64,
    z: Complex64,
    mask: Option<&AbsorbingMask>,
) -> Result<(f64, bool)> {
    let grid = wave.grid;
    let old = wave.clone();
    let floor = AMPLITUDE_FLOOR * max_amplitude(&old);
    CnWorkspace::new(grid.len()).step(&mut wave.values, potential, grid.dx(), z)?;
    let (v1, n1) = guided_velocity(&old, x, cap, floor);
    let x_half = x + 0.5 * dt * v1;
    let mut mid = old;
    for (a, b) in mid.values.iter_mut().zip(&wave.values) {
        *a = 0.5 * (*a + b);
    }
    let (v2, n2) = guided_velocity(&mid, x_half, cap, floor);
    if let Some(mask) = mask {
        for (v, f) in wave.values.iter_mut().zip(&mask.values) {
            *v *= *f;
        }
    }
    Ok(((x + dt * v2).clamp(grid.x_min(), grid.x_max()), n1 || n2))
}
