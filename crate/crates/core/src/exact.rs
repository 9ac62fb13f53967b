//! Numerically exact two-electron solver on a square grid.
//!
//! Time stepping splits off the e–e repulsion symmetrically and applies
//! Crank–Nicolson along `x2` (rows) and `x1` (columns). The two directional
//! Cayley factors commute, so each step keeps the exchange symmetry of Ψ.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{Grid1D, WaveFn1D, WaveFn2D};
use crate::observables::DensityMatrix;
use crate::onebody::{nuclear_potential, soft_core_ground_state};
use crate::par;
use crate::potentials::{field_at, v_ee, LaserPulse, SoftCoreParams};
use crate::propagation::AbsorbingMask;
use crate::tridiag::CnWorkspace;

#[derive(Debug, Clone, PartialEq)]
pub struct TwoBodyState {
    pub psi: WaveFn2D,
    pub t: f64,
}

impl TwoBodyState {
    pub fn grid(&self) -> Grid1D {
        self.psi.grid1
    }
}

/// Stepping context for one grid and model; caches the e–e phase factors.
#[derive(Debug, Clone)]
pub struct ExactPropagator {
    grid: Grid1D,
    params: SoftCoreParams,
    nuclear: Vec<f64>,
    /// Absorber applied as `mask(x1) · mask(x2)` after each real-time step.
    pub mask: Option<AbsorbingMask>,
    scratch: Vec<Complex64>,
    cached_dt: Option<(f64, bool)>,
    ee_factor: Vec<Complex64>,
}

impl ExactPropagator {
    pub fn new(grid: Grid1D, params: SoftCoreParams) -> Self {
        Self {
            grid,
            params,
            nuclear: nuclear_potential(&grid, &params),
            mask: None,
            scratch: Vec::new(),
            cached_dt: None,
            ee_factor: Vec::new(),
        }
    }

    pub fn with_mask(mut self, mask: AbsorbingMask) -> Self {
        self.mask = Some(mask);
        self
    }

    pub fn params(&self) -> &SoftCoreParams {
        &self.params
    }

    fn check(&self, psi: &WaveFn2D) -> Result<()> {
        self.grid.ensure_same(&psi.grid1)?;
        self.grid.ensure_same(&psi.grid2)
    }

    /// Half-step e–e factors indexed by `i1 − i2 + n − 1`.
    fn ee_factors(&mut self, dt: f64, imaginary: bool) {
        if self.cached_dt == Some((dt, imaginary)) {
            return;
        }
        let n = self.grid.len();
        let dx = self.grid.dx();
        self.ee_factor = (0..2 * n - 1)
            .map(|d| {
                let v = v_ee((d as f64 - (n - 1) as f64) * dx, &self.params);
                if imaginary {
                    Complex64::new((-0.5 * dt * v).exp(), 0.0)
                } else {
                    Complex64::from_polar(1.0, -0.5 * dt * v)
                }
            })
            .collect();
        self.cached_dt = Some((dt, imaginary));
    }

    fn apply_ee(&self, values: &mut [Complex64]) {
        let n = self.grid.len();
        let f = &self.ee_factor;
        par::for_each_chunk_mut(values, n, |i1, row| {
            for (i2, v) in row.iter_mut().enumerate() {
                *v *= f[i1 + n - 1 - i2];
            }
        });
    }

    fn sweep_rows(&self, values: &mut [Complex64], potential: &[f64], z: Complex64) -> Result<()> {
        let n = self.grid.len();
        let dx = self.grid.dx();
        let errors: Vec<Option<Error>> = {
            let mut errs = vec![None; n];
            let mut rows: Vec<(&mut [Complex64], &mut Option<Error>)> =
                values.chunks_mut(n).zip(errs.iter_mut()).collect();
            par::for_each_mut(&mut rows, |_, (row, err)| {
                let mut ws = CnWorkspace::new(n);
                if let Err(e) = ws.step(row, potential, dx, z) {
                    **err = Some(e);
                }
            });
            errs
        };
        match errors.into_iter().flatten().next() {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }

    fn transpose(&mut self, values: &mut [Complex64]) {
        let n = self.grid.len();
        self.scratch.resize(n * n, Complex64::new(0.0, 0.0));
        for i in 0..n {
            for j in 0..n {
                self.scratch[j * n + i] = values[i * n + j];
            }
        }
        values.copy_from_slice(&self.scratch);
    }

    fn split_step(&mut self, psi: &mut WaveFn2D, dt: f64, field: f64, imaginary: bool) -> Result<()> {
        self.check(psi)?;
        self.ee_factors(dt, imaginary);
        let potential: Vec<f64> = self
            .nuclear
            .iter()
            .zip(self.grid.points())
            .map(|(v, x)| v - x * field)
            .collect();
        let z = if imaginary { Complex64::new(0.5 * dt, 0.0) } else { Complex64::new(0.0, 0.5 * dt) };
        self.apply_ee(&mut psi.values);
        self.sweep_rows(&mut psi.values, &potential, z)?;
        self.transpose(&mut psi.values);
        self.sweep_rows(&mut psi.values, &potential, z)?;
        self.transpose(&mut psi.values);
        self.apply_ee(&mut psi.values);
        Ok(())
    }

    /// Real-time step of `dt` under the pulse (field taken at mid-step).
    pub fn step(&mut self, state: &mut TwoBodyState, pulse: Option<&LaserPulse>, dt: f64) -> Result<()> {
        if dt == 0.0 {
            return Ok(());
        }
        let field = pulse.map(|p| field_at(state.t + 0.5 * dt, p)).unwrap_or(0.0);
        self.split_step(&mut state.psi, dt, field, false)?;
        if let Some(mask) = &self.mask {
            let n = self.grid.len();
            let m = &mask.values;
            par::for_each_chunk_mut(&mut state.psi.values, n, |i1, row| {
                for (i2, v) in row.iter_mut().enumerate() {
                    *v *= m[i1] * m[i2];
                }
            });
        }
        state.t += dt;
        Ok(())
    }

    /// Imaginary-time step followed by renormalization.
    pub fn imaginary_step(&mut self, psi: &mut WaveFn2D, dtau: f64) -> Result<()> {
        self.split_step(psi, dtau, 0.0, true)?;
        psi.normalize()
    }

    /// `⟨Ψ|H|Ψ⟩ / ⟨Ψ|Ψ⟩` with the propagator's finite-difference stencil.
    pub fn energy(&self, psi: &WaveFn2D, field: f64) -> f64 {
        let n = self.grid.len();
        let dx = self.grid.dx();
        let kin = 1.0 / (dx * dx);
        let pot: Vec<f64> = self.nuclear.iter().zip(self.grid.points()).map(|(v, x)| v - x * field).collect();
        let ee: Vec<f64> = (0..2 * n - 1).map(|d| v_ee((d as f64 - (n - 1) as f64) * dx, &self.params)).collect();
        let v = &psi.values;
        let rows = par::map_range(n, |i| {
            let (mut num, mut den) = (0.0, 0.0);
            for j in 0..n {
                let c = v[i * n + j];
                let mut h = c * (2.0 * kin + pot[i] + pot[j] + ee[i + n - 1 - j]);
                if i > 0 {
                    h -= v[(i - 1) * n + j] * (0.5 * kin);
                }
                if i + 1 < n {
                    h -= v[(i + 1) * n + j] * (0.5 * kin);
                }
                if j > 0 {
                    h -= v[i * n + j - 1] * (0.5 * kin);
                }
                if j + 1 < n {
                    h -= v[i * n + j + 1] * (0.5 * kin);
                }
                num += (c.conj() * h).re;
                den += c.norm_sqr();
            }
            (num, den)
        });
        let (num, den) = rows.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
        num / den
    }
}

/// Imaginary-time settings for [`exact_ground_state`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundStateOptions {
    pub dtau: f64,
    /// Stop when the energy changes by less than this in one step.
    pub tol: f64,
    pub max_steps: usize,
}

impl Default for GroundStateOptions {
    fn default() -> Self {
        Self { dtau: 0.05, tol: 1e-8, max_steps: 20_000 }
    }
}

/// Symmetric product `φ(x1) φ(x2)` of one-electron states.
pub fn product_state(phi: &WaveFn1D) -> WaveFn2D {
    let n = phi.grid.len();
    let mut values = Vec::with_capacity(n * n);
    for a in &phi.values {
        for b in &phi.values {
            values.push(a * b);
        }
    }
    WaveFn2D { grid1: phi.grid, grid2: phi.grid, values }
}

/// Two-electron ground state by imaginary-time relaxation of the product of
/// bare one-electron ground states. Returns the state and `⟨H⟩`.
pub fn exact_ground_state(
    params: &SoftCoreParams,
    grid: &Grid1D,
    opts: &GroundStateOptions,
) -> Result<(TwoBodyState, f64)> {
    let bare = SoftCoreParams { a: params.a, b: 0.0 };
    let (phi, _) = soft_core_ground_state(grid, &bare)?;
    let mut psi = product_state(&phi);
    psi.normalize()?;
    let mut prop = ExactPropagator::new(*grid, *params);
    let mut energy = prop.energy(&psi, 0.0);
    let mut change = f64::INFINITY;
    for _ in 0..opts.max_steps {
        prop.imaginary_step(&mut psi, opts.dtau)?;
        let e = prop.energy(&psi, 0.0);
        change = (e - energy).abs();
        energy = e;
        if change < opts.tol {
            return Ok((TwoBodyState { psi, t: 0.0 }, energy));
        }
    }
    Err(Error::NoConvergence { steps: opts.max_steps, last_change: change })
}

/// One real-time step of the exact two-body state.
pub fn exact_real_time_step(
    state: &mut TwoBodyState,
    pulse: Option<&LaserPulse>,
    params: &SoftCoreParams,
    dt: f64,
    mask: Option<&AbsorbingMask>,
) -> Result<()> {
    let mut prop = ExactPropagator::new(state.grid(), *params);
    prop.mask = mask.cloned();
    prop.step(state, pulse, dt)
}

#[inline]
fn derivative(psi: &WaveFn2D, i1: usize, i2: usize, axis: usize) -> Complex64 {
    let n1 = psi.grid1.len();
    let n2 = psi.grid2.len();
    let (i, n, dx) = if axis == 0 { (i1, n1, psi.grid1.dx()) } else { (i2, n2, psi.grid2.dx()) };
    let at = |k: usize| if axis == 0 { psi.values[psi.index(k, i2)] } else { psi.values[psi.index(i1, k)] };
    if i == 0 {
        (at(1) - at(0)) / dx
    } else if i + 1 == n {
        (at(n - 1) - at(n - 2)) / dx
    } else {
        (at(i + 1) - at(i - 1)) / (2.0 * dx)
    }
}

/// Guidance velocities and interpolated amplitude at `(x1, x2)`.
pub(crate) fn velocity_parts(psi: &WaveFn2D, x1: f64, x2: f64) -> Option<((f64, f64), Complex64)> {
    let (i, s) = psi.grid1.locate(x1)?;
    let (j, t) = psi.grid2.locate(x2)?;
    let w = [(i, j, (1.0 - s) * (1.0 - t)), (i, j + 1, (1.0 - s) * t), (i + 1, j, s * (1.0 - t)), (i + 1, j + 1, s * t)];
    let mut val = Complex64::new(0.0, 0.0);
    let mut d1 = Complex64::new(0.0, 0.0);
    let mut d2 = Complex64::new(0.0, 0.0);
    for &(a, b, f) in &w {
        val += psi.values[psi.index(a, b)] * f;
        d1 += derivative(psi, a, b, 0) * f;
        d2 += derivative(psi, a, b, 1) * f;
    }
    if val.norm_sqr() == 0.0 {
        return Some(((0.0, 0.0), val));
    }
    Some((((d1 / val).im, (d2 / val).im), val))
}

/// Velocities `v_i = Im(∂_i Ψ / Ψ)` of the two electrons at `(x1, x2)`.
pub fn exact_trajectory_velocity(state: &TwoBodyState, x1: f64, x2: f64) -> Result<(f64, f64)> {
    let (v, val) = velocity_parts(&state.psi, x1, x2).ok_or(Error::NodeProximity { x: x1, amplitude: 0.0 })?;
    let max = state.psi.values.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if val.norm() < crate::propagation::AMPLITUDE_FLOOR * max {
        return Err(Error::NodeProximity { x: x1, amplitude: val.norm() });
    }
    Ok(v)
}

/// Moves exact Bohmian trajectories across one step with the midpoint rule,
/// using `(old + new)/2` as the mid-step wavefunction. Speeds are capped at
/// `dx/dt`; returns the number of node encounters.
pub fn advance_trajectories(
    old: &WaveFn2D,
    new: &WaveFn2D,
    positions: &mut [(f64, f64)],
    dt: f64,
) -> usize {
    let cap = old.grid1.dx() / dt.abs();
    let max = old.values.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let floor = crate::propagation::AMPLITUDE_FLOOR * max;
    let mut mid = old.clone();
    for (a, b) in mid.values.iter_mut().zip(&new.values) {
        *a = 0.5 * (*a + b);
    }
    let g = old.grid1;
    let vel = |psi: &WaveFn2D, x1: f64, x2: f64| -> ((f64, f64), bool) {
        match velocity_parts(psi, x1, x2) {
            Some(((a, b), val)) => {
                let clip = |v: f64| if v.is_finite() { v.clamp(-cap, cap) } else { 0.0 };
                ((clip(a), clip(b)), val.norm() < floor)
            }
            None => ((0.0, 0.0), true),
        }
    };
    let mut nodes = 0;
    for p in positions.iter_mut() {
        let ((u1, u2), n1) = vel(old, p.0, p.1);
        let h = (p.0 + 0.5 * dt * u1, p.1 + 0.5 * dt * u2);
        let ((w1, w2), n2) = vel(&mid, h.0, h.1);
        *p = (
            (p.0 + dt * w1).clamp(g.x_min(), g.x_max()),
            (p.1 + dt * w2).clamp(g.x_min(), g.x_max()),
        );
        nodes += (n1 || n2) as usize;
    }
    nodes
}

/// One-electron reduced density matrix
/// `ρ(x, x′) = ∫ Ψ*(x, x2) Ψ(x′, x2) dx2`, in the same orientation as the
/// guide-wave ensemble matrix.
pub fn reduced_density_matrix(state: &TwoBodyState) -> DensityMatrix {
    let psi = &state.psi;
    let n = psi.grid1.len();
    let n2 = psi.grid2.len();
    let w2: Vec<f64> = (0..n2).map(|j| psi.grid2.weight(j)).collect();
    let rows = par::map_range(n, |a| {
        let ra = &psi.values[a * n2..(a + 1) * n2];
        let conj_w: Vec<Complex64> = ra.iter().zip(&w2).map(|(v, w)| v.conj() * *w).collect();
        (a..n)
            .map(|b| {
                let rb = &psi.values[b * n2..(b + 1) * n2];
                conj_w.iter().zip(rb).map(|(x, y)| x * y).sum::<Complex64>()
            })
            .collect::<Vec<_>>()
    });
    let mut values = vec![Complex64::new(0.0, 0.0); n * n];
    for (a, row) in rows.into_iter().enumerate() {
        for (off, v) in row.into_iter().enumerate() {
            let b = a + off;
            values[a * n + b] = v;
            values[b * n + a] = v.conj();
        }
    }
    DensityMatrix { grid: psi.grid1, values }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observables::purity;
    use approx::assert_abs_diff_eq;

    #[test]
    fn noninteracting_ground_state_is_a_product() {
        let grid = Grid1D::symmetric(12.0, 0.2).unwrap();
        let params = SoftCoreParams { a: 2.0, b: 0.0 };
        let (state, e) = exact_ground_state(&params, &grid, &GroundStateOptions::default()).unwrap();
        let (phi, e1) = soft_core_ground_state(&grid, &params).unwrap();
        assert_abs_diff_eq!(e, 2.0 * e1, epsilon = 1e-6);
        let prod = product_state(&phi);
        let overlap: f64 = prod.values.iter().zip(&state.psi.values).map(|(a, b)| (a.conj() * b).re).sum::<f64>()
            * grid.dx() * grid.dx();
        assert_abs_diff_eq!(overlap, 1.0, epsilon = 1e-6);
        let rho = reduced_density_matrix(&state);
        assert_abs_diff_eq!(purity(&rho), 1.0, epsilon = 1e-6);
    }

    #[test]
    fn helium_ground_state_is_symmetric() {
        let grid = Grid1D::symmetric(10.0, 0.25).unwrap();
        let (state, e) = exact_ground_state(&SoftCoreParams::HELIUM, &grid, &GroundStateOptions::default()).unwrap();
        assert!(state.psi.exchange_asymmetry().unwrap() < 1e-8);
        assert!(e < -2.2 && e > -2.3, "{e}");
        assert_abs_diff_eq!(state.psi.norm_sqr(), 1.0, epsilon = 1e-8);
    }

    #[test]
    fn ground_energy_matches_dense_eigensolver() {
        let grid = Grid1D::symmetric(6.0, 0.5).unwrap();
        let params = SoftCoreParams::HELIUM;
        let opts = GroundStateOptions { dtau: 0.02, tol: 1e-12, max_steps: 50_000 };
        let (_, e) = exact_ground_state(&params, &grid, &opts).unwrap();
        let n = grid.len();
        let dx = grid.dx();
        let x: Vec<f64> = grid.points().collect();
        let h = nalgebra::DMatrix::from_fn(n * n, n * n, |r, c| {
            let (i, j) = (r / n, r % n);
            let (k, l) = (c / n, c % n);
            let mut v = 0.0;
            if r == c {
                v += 2.0 / (dx * dx) - params.a / (1.0 + x[i] * x[i]).sqrt() - params.a / (1.0 + x[j] * x[j]).sqrt()
                    + params.b / (1.0 + (x[i] - x[j]).powi(2)).sqrt();
            }
            if (i == k && (j as i64 - l as i64).abs() == 1) || (j == l && (i as i64 - k as i64).abs() == 1) {
                v -= 0.5 / (dx * dx);
            }
            v
        });
        let e_dense = h.symmetric_eigen().eigenvalues.min();
        assert_abs_diff_eq!(e, e_dense, epsilon = 1e-6);
    }

    #[test]
    fn product_of_plane_waves_has_constant_velocity() {
        let grid = Grid1D::symmetric(10.0, 0.05).unwrap();
        let psi = WaveFn2D::from_fn(grid, grid, |a, b| {
            Complex64::from_polar((-(a * a + b * b) / 8.0).exp(), 0.3 * a - 0.7 * b)
        });
        let state = TwoBodyState { psi, t: 0.0 };
        let (v1, v2) = exact_trajectory_velocity(&state, 0.4, -1.1).unwrap();
        assert_abs_diff_eq!(v1, 0.3, epsilon = 1e-3);
        assert_abs_diff_eq!(v2, -0.7, epsilon = 1e-3);
    }

    #[test]
    fn real_state_has_zero_velocity_and_symmetric_diagonal() {
        let grid = Grid1D::symmetric(8.0, 0.2).unwrap();
        let psi = WaveFn2D::from_fn(grid, grid, |a, b| {
            Complex64::new((-(a * a + b * b)).exp() * (1.0 + 0.5 / (1.0 + (a - b).powi(2))), 0.0)
        });
        let state = TwoBodyState { psi, t: 0.0 };
        let (v1, v2) = exact_trajectory_velocity(&state, 0.3, 0.3).unwrap();
        assert_eq!((v1, v2), (0.0, 0.0));
        let boosted = WaveFn2D::from_fn(grid, grid, |a, b| {
            Complex64::from_polar((-(a * a + b * b)).exp(), 0.4 * (a + b) + 0.2 * (a * a + b * b))
        });
        let st = TwoBodyState { psi: boosted, t: 0.0 };
        let (u1, u2) = exact_trajectory_velocity(&st, 0.7, 0.7).unwrap();
        assert_abs_diff_eq!(u1, u2, epsilon = 1e-12);
    }
}
