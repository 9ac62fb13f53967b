//! Lowest eigenpair of a one-body grid Hamiltonian `−½∂² + V`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{Grid1D, WaveFn1D};
use crate::potentials::{v_en, SoftCoreParams};

/// Solves `(H − shift) u = rhs` for the real symmetric tridiagonal `H`.
fn shifted_solve(potential: &[f64], dx: f64, shift: f64, rhs: &mut [f64]) -> Result<()> {
    let n = rhs.len();
    let kin = 1.0 / (dx * dx);
    let off = -0.5 * kin;
    let mut c = vec![0.0; n];
    let mut denom = kin + potential[0] - shift;
    if denom == 0.0 {
        return Err(Error::LinearSolveFailure(0));
    }
    c[0] = off / denom;
    rhs[0] /= denom;
    for i in 1..n {
        denom = kin + potential[i] - shift - off * c[i - 1];
        if denom == 0.0 || !denom.is_finite() {
            return Err(Error::LinearSolveFailure(i));
        }
        c[i] = off / denom;
        rhs[i] = (rhs[i] - off * rhs[i - 1]) / denom;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= c[i] * rhs[i + 1];
    }
    Ok(())
}

fn rayleigh(potential: &[f64], dx: f64, u: &[f64]) -> f64 {
    let n = u.len();
    let kin = 1.0 / (dx * dx);
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..n {
        let mut hu = (kin + potential[i]) * u[i];
        if i > 0 {
            hu -= 0.5 * kin * u[i - 1];
        }
        if i + 1 < n {
            hu -= 0.5 * kin * u[i + 1];
        }
        num += u[i] * hu;
        den += u[i] * u[i];
    }
    num / den
}

/// Ground state of `−½∂² + potential` on `grid` by shifted inverse iteration
/// refined with Rayleigh-quotient shifts. The returned state is real,
/// positive and unit-norm.
pub fn ground_state(grid: &Grid1D, potential: &[f64]) -> Result<(WaveFn1D, f64)> {
    let n = grid.len();
    let dx = grid.dx();
    let vmin = potential.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut u: Vec<f64> = (0..n)
        .map(|i| {
            let s = i as f64 / (n - 1) as f64;
            (std::f64::consts::PI * s).sin() + 1e-3
        })
        .collect();
    let mut shift = vmin - 1.0;
    let mut energy = rayleigh(potential, dx, &u);
    for iter in 0..500 {
        shifted_solve(potential, dx, shift, &mut u)?;
        let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
        u.iter_mut().for_each(|v| *v /= norm);
        let e = rayleigh(potential, dx, &u);
        let change = (e - energy).abs();
        energy = e;
        if iter >= 30 {
            shift = e - 1e-7 * (1.0 + e.abs());
        }
        if iter >= 40 && change < 1e-14 * (1.0 + e.abs()) {
            break;
        }
    }
    if u.iter().sum::<f64>() < 0.0 {
        u.iter_mut().for_each(|v| *v = -*v);
    }
    let w = WaveFn1D::new(*grid, u.into_iter().map(|v| Complex64::new(v, 0.0)).collect())?.normalized()?;
    Ok((w, energy))
}

/// Soft-core electron–nucleus potential sampled on `grid`.
pub fn nuclear_potential(grid: &Grid1D, params: &SoftCoreParams) -> Vec<f64> {
    grid.points().map(|x| v_en(x, params)).collect()
}

/// Ground state of a single electron bound by the soft-core nucleus.
pub fn soft_core_ground_state(grid: &Grid1D, params: &SoftCoreParams) -> Result<(WaveFn1D, f64)> {
    ground_state(grid, &nuclear_potential(grid, params))
}
