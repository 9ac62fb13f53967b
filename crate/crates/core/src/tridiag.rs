//! Crank–Nicolson building blocks for `H = −½ ∂² + V` on a uniform grid
//! with zero Dirichlet values just outside the end points.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Solves `(d_i) u_i + c (u_{i−1} + u_{i+1}) = rhs_i` in place (Thomas
/// algorithm with constant off-diagonal `c`). `scratch` must have the same
/// length as `rhs`.
pub fn solve_const_offdiag(
    diag: &[Complex64],
    off: Complex64,
    rhs: &mut [Complex64],
    scratch: &mut [Complex64],
) -> Result<()> {
    let n = rhs.len();
    let mut denom = diag[0];
    if denom.norm_sqr() == 0.0 {
        return Err(Error::LinearSolveFailure(0));
    }
    scratch[0] = off / denom;
    rhs[0] /= denom;
    for i in 1..n {
        denom = diag[i] - off * scratch[i - 1];
        if denom.norm_sqr() == 0.0 || !denom.re.is_finite() {
            return Err(Error::LinearSolveFailure(i));
        }
        scratch[i] = off / denom;
        rhs[i] = (rhs[i] - off * rhs[i - 1]) / denom;
    }
    for i in (0..n - 1).rev() {
        let next = rhs[i + 1];
        rhs[i] -= scratch[i] * next;
    }
    Ok(())
}

/// Reusable buffers for one Crank–Nicolson line update.
#[derive(Debug, Clone, Default)]
pub struct CnWorkspace {
    diag: Vec<Complex64>,
    rhs: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl CnWorkspace {
    pub fn new(n: usize) -> Self {
        Self {
            diag: vec![Complex64::new(0.0, 0.0); n],
            rhs: vec![Complex64::new(0.0, 0.0); n],
            scratch: vec![Complex64::new(0.0, 0.0); n],
        }
    }

    /// Applies `(1 + z H)^{-1} (1 − z H)` to `psi` in place, where `z` is
    /// `i·dt/2` for real time and `dτ/2` for imaginary time. The values are
    /// read with stride `stride` starting at `psi[0]`, which lets the same
    /// routine sweep rows and columns of a 2D array.
    pub fn step_strided(
        &mut self,
        psi: &mut [Complex64],
        stride: usize,
        n: usize,
        potential: &[f64],
        dx: f64,
        z: Complex64,
    ) -> Result<()> {
        if self.diag.len() != n {
            *self = Self::new(n);
        }
        let kin = 1.0 / (dx * dx);
        // H has diagonal kin + V and off-diagonal −kin/2.
        let off_h = -0.5 * kin;
        for i in 0..n {
            let h_diag = kin + potential[i];
            let center = psi[i * stride];
            let mut h_psi = center * h_diag;
            if i > 0 {
                h_psi += psi[(i - 1) * stride] * off_h;
            }
            if i + 1 < n {
                h_psi += psi[(i + 1) * stride] * off_h;
            }
            self.rhs[i] = center - z * h_psi;
            self.diag[i] = Complex64::new(1.0, 0.0) + z * h_diag;
        }
        solve_const_offdiag(&self.diag, z * off_h, &mut self.rhs, &mut self.scratch)?;
        for i in 0..n {
            psi[i * stride] = self.rhs[i];
        }
        Ok(())
    }

    pub fn step(&mut self, psi: &mut [Complex64], potential: &[f64], dx: f64, z: Complex64) -> Result<()> {
        let n = psi.len();
        self.step_strided(psi, 1, n, potential, dx, z)
    }
}

/// `(H ψ)_i` with the same stencil the propagator uses.
pub fn apply_hamiltonian(psi: &[Complex64], potential: &[f64], dx: f64, out: &mut [Complex64]) {
    let n = psi.len();
    let kin = 1.0 / (dx * dx);
    for i in 0..n {
        let mut v = psi[i] * (kin + potential[i]);
        if i > 0 {
            v -= psi[i - 1] * (0.5 * kin);
        }
        if i + 1 < n {
            v -= psi[i + 1] * (0.5 * kin);
        }
        out[i] = v;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thomas_matches_dense_solve() {
        let n = 12;
        let diag: Vec<Complex64> = (0..n).map(|i| Complex64::new(3.0 + i as f64 * 0.1, 0.4)).collect();
        let off = Complex64::new(-0.7, 0.2);
        let x_true: Vec<Complex64> = (0..n).map(|i| Complex64::new(i as f64, 1.0 - i as f64)).collect();
        let mut rhs: Vec<Complex64> = (0..n)
            .map(|i| {
                let mut v = diag[i] * x_true[i];
                if i > 0 {
                    v += off * x_true[i - 1];
                }
                if i + 1 < n {
                    v += off * x_true[i + 1];
                }
                v
            })
            .collect();
        let mut scratch = vec![Complex64::new(0.0, 0.0); n];
        solve_const_offdiag(&diag, off, &mut rhs, &mut scratch).unwrap();
        for (a, b) in rhs.iter().zip(&x_true) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn zero_pivot_reports_failure() {
        let diag = vec![Complex64::new(0.0, 0.0); 4];
        let mut rhs = vec![Complex64::new(1.0, 0.0); 4];
        let mut scratch = rhs.clone();
        assert_eq!(
            solve_const_offdiag(&diag, Complex64::new(1.0, 0.0), &mut rhs, &mut scratch),
            Err(Error::LinearSolveFailure(0))
        );
    }
}
