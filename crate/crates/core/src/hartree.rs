//! Self-consistent Hartree solution for two electrons sharing one orbital.
//! This is the mean-field reference the infinitely wide window reduces to.

use crate::error::{Error, Result};
use crate::grid::{Grid1D, WaveFn1D};
use crate::onebody::{ground_state, nuclear_potential};
use crate::potentials::{v_ee, SoftCoreParams};

#[derive(Debug, Clone)]
pub struct HartreeSolution {
    pub orbital: WaveFn1D,
    pub orbital_energy: f64,
    /// `2⟨φ|h|φ⟩ + ⟨V_ee⟩`.
    pub total_energy: f64,
    /// `∫∫ |φ(x)|² |φ(y)|² v_ee(x − y)`.
    pub ee_energy: f64,
    pub iterations: usize,
}

/// Hartree potential `∫ ρ(y) v_ee(x − y) dy` of `density` on `grid`.
pub fn hartree_potential(grid: &Grid1D, density: &[f64], params: &SoftCoreParams) -> Vec<f64> {
    let n = grid.len();
    let dx = grid.dx();
    let weighted: Vec<f64> = (0..n).map(|j| density[j] * grid.weight(j)).collect();
    (0..n)
        .map(|i| {
            weighted
                .iter()
                .enumerate()
                .map(|(j, w)| w * v_ee((i as f64 - j as f64) * dx, params))
                .sum()
        })
        .collect()
}

pub fn hartree_scf(grid: &Grid1D, params: &SoftCoreParams, tol: f64, max_iter: usize) -> Result<HartreeSolution> {
    let v_nuc = nuclear_potential(grid, params);
    let (mut orbital, _) = ground_state(grid, &v_nuc)?;
    let mut density: Vec<f64> = orbital.values.iter().map(|v| v.norm_sqr()).collect();
    let mut last = f64::INFINITY;
    let mut change = f64::INFINITY;
    for iter in 0..max_iter {
        let vh = hartree_potential(grid, &density, params);
        let total: Vec<f64> = v_nuc.iter().zip(&vh).map(|(a, b)| a + b).collect();
        let (phi, eps) = ground_state(grid, &total)?;
        let new_density: Vec<f64> = phi.values.iter().map(|v| v.norm_sqr()).collect();
        orbital = phi;
        // E = 2ε − ⟨V_H⟩, evaluated with the potential the orbital solved.
        let vh_new = hartree_potential(grid, &new_density, params);
        let ee: Vec<f64> = new_density.iter().zip(&vh_new).map(|(r, v)| r * v).collect();
        let ee_energy = grid.integrate(&ee);
        let vh_in: Vec<f64> = new_density.iter().zip(&vh).map(|(r, v)| r * v).collect();
        let one_body = eps - grid.integrate(&vh_in);
        let energy = 2.0 * one_body + ee_energy;
        change = (energy - last).abs();
        last = energy;
        for (d, n) in density.iter_mut().zip(&new_density) {
            *d = 0.5 * *d + 0.5 * n;
        }
        if change < tol && iter > 2 {
            return Ok(HartreeSolution {
                orbital,
                orbital_energy: eps,
                total_energy: energy,
                ee_energy,
                iterations: iter + 1,
            });
        }
    }
    Err(Error::NoConvergence { steps: max_iter, last_change: change })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::onebody::soft_core_ground_state;
    use approx::assert_abs_diff_eq;

    #[test]
    fn no_interaction_gives_twice_one_body_energy() {
        let grid = Grid1D::symmetric(20.0, 0.2).unwrap();
        let params = SoftCoreParams { a: 2.0, b: 0.0 };
        let h = hartree_scf(&grid, &params, 1e-12, 200).unwrap();
        let (_, e1) = soft_core_ground_state(&grid, &params).unwrap();
        assert_abs_diff_eq!(h.total_energy, 2.0 * e1, epsilon = 1e-10);
        assert_abs_diff_eq!(h.ee_energy, 0.0);
    }

    #[test]
    fn helium_hartree_energy_lies_between_bounds() {
        let grid = Grid1D::symmetric(25.0, 0.1).unwrap();
        let h = hartree_scf(&grid, &SoftCoreParams::HELIUM, 1e-11, 500).unwrap();
        // Mean field sits above the correlated energy (≈ −2.238) and well below
        // the He⁺ threshold.
        assert!(h.total_energy > -2.238 && h.total_energy < -2.2, "{}", h.total_energy);
        assert!(h.ee_energy > 0.3 && h.ee_energy < 1.0);
    }
}
