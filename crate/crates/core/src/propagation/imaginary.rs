use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{local_energy_with_floor, max_amplitude, EnsembleState, AMPLITUDE_FLOOR};
use crate::error::{Error, Result};
use crate::grid::WaveFn1D;
use crate::onebody::nuclear_potential;
use crate::par;
use crate::potentials::SoftCoreParams;
use crate::rng::{stream, Purpose};
use crate::tridiag::{apply_hamiltonian, CnWorkspace};
use crate::walkers::effective_potentials_all;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImaginaryTimeOptions {
    pub dtau: f64,
    /// Variance of the walker noise per unit imaginary time (ħ/m times the
    /// annealing factor).
    pub noise_variance: f64,
    /// Accept or reject each walker move against `|φ|²` of its guide wave.
    pub metropolis: bool,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImaginaryStepReport {
    /// Local energy of wave `(i, k)` at its walker, flattened as `i * m + k`,
    /// in the potential the wave was relaxed in.
    pub local_energies: Vec<f64>,
    pub accepted_moves: usize,
    /// Local energies that had to fall back to the wave's mean energy.
    pub node_events: usize,
}

impl ImaginaryStepReport {
    /// `Σ_i E_L(i, k)` for each replica `k`.
    pub fn replica_energies(&self, n_electrons: usize) -> Vec<f64> {
        let m = self.local_energies.len() / n_electrons;
        (0..m)
            .map(|k| (0..n_electrons).map(|i| self.local_energies[i * m + k]).sum())
            .collect()
    }
}

/// One imaginary-time step: every guide wave relaxes by `dτ` under its own
/// frozen potential and is renormalized; every walker takes a zero-drift
/// Gaussian move of variance `noise_variance · dτ`.
pub fn imaginary_time_step(
    state: &mut EnsembleState,
    params: &SoftCoreParams,
    opts: &ImaginaryTimeOptions,
) -> Result<ImaginaryStepReport> {
    let grid = state.grid;
    let m = state.n_walkers();
    let veff = effective_potentials_all(&grid, &state.clouds, &state.kernel, params)?;
    let base = nuclear_potential(&grid, params);
    let positions: Vec<f64> = state.clouds.iter().flat_map(|c| c.positions.iter().cloned()).collect();
    let z = Complex64::new(0.5 * opts.dtau, 0.0);
    let step_len = (opts.noise_variance.max(0.0) * opts.dtau).sqrt();
    let step = state.step;

    // (new position, local energy, accepted, energy fallback) per replica.
    type Outcome = Result<(f64, f64, bool, bool)>;
    let mut jobs: Vec<(&mut WaveFn1D, Outcome)> =
        state.waves.iter_mut().map(|w| (w, Ok((0.0, 0.0, false, false)))).collect();
    par::for_each_mut(&mut jobs, |idx, (wave, out)| {
        let (i, k) = (idx / m, idx % m);
        let pot: Vec<f64> = base.iter().zip(&veff[i][k]).map(|(a, b)| a + b).collect();
        *out = (|| {
            CnWorkspace::new(grid.len()).step(&mut wave.values, &pot, grid.dx(), z)?;
            wave.normalize()?;
            let x = positions[idx];
            let mut x_new = x;
            let mut accepted = false;
            if step_len > 0.0 {
                let mut rng = stream(opts.seed, step, idx as u64, Purpose::WalkerMove);
                let eta: f64 = rng.sample(StandardNormal);
                let proposal = x + step_len * eta;
                if grid.contains(proposal) {
                    let ok = if opts.metropolis {
                        let ratio = wave.at(proposal).norm_sqr() / wave.at(x).norm_sqr().max(f64::MIN_POSITIVE);
                        ratio >= 1.0 || rng.random::<f64>() < ratio
                    } else {
                        true
                    };
                    if ok {
                        x_new = proposal;
                        accepted = true;
                    }
                }
            }
            let floor = AMPLITUDE_FLOOR * max_amplitude(wave);
            let (e, fallback) = match local_energy_with_floor(wave, &pot, x_new, floor) {
                Ok(e) => (e, false),
                Err(_) => (mean_energy(wave, &pot), true),
            };
            Ok((x_new, e, accepted, fallback))
        })();
    });
    let outcomes = jobs.into_iter().map(|(_, r)| r).collect::<Result<Vec<_>>>()?;

    let mut report = ImaginaryStepReport {
        local_energies: Vec::with_capacity(outcomes.len()),
        accepted_moves: 0,
        node_events: 0,
    };
    for (idx, (x, e, acc, fb)) in outcomes.into_iter().enumerate() {
        state.clouds[idx / m].positions[idx % m] = x;
        report.local_energies.push(e);
        report.accepted_moves += acc as usize;
        report.node_events += fb as usize;
    }
    state.t += opts.dtau;
    state.step += 1;
    Ok(report)
}

fn mean_energy(wave: &WaveFn1D, potential: &[f64]) -> f64 {
    let mut h = vec![Complex64::new(0.0, 0.0); wave.values.len()];
    apply_hamiltonian(&wave.values, potential, wave.grid.dx(), &mut h);
    let num: f64 = wave.values.iter().zip(&h).map(|(a, b)| (a.conj() * b).re).sum();
    let den: f64 = wave.values.iter().map(|a| a.norm_sqr()).sum();
    num / den
}

/// Birth/death resampling of whole replicas.
///
/// Replica `k` gets `floor(exp(−dτ (E_k − E_ref)) + u)` copies, where `E_k`
/// is its entry in `replica_energies` and `u ~ U(0, 1)`; the walker and guide
/// wave of every electron are copied or dropped together. The population is
/// then brought back to exactly `M` by uniform sub- or super-sampling.
/// Returns the new reference energy, the mean of `E_k` over the new
/// population.
pub fn branch_resample(
    state: &mut EnsembleState,
    replica_energies: &[f64],
    e_ref: f64,
    dtau: f64,
    seed: u64,
) -> Result<f64> {
    let m = state.n_walkers();
    if replica_energies.len() != m {
        return Err(Error::LengthMismatch(format!(
            "{} replica energies for {m} replicas",
            replica_energies.len()
        )));
    }
    let mut rng = stream(seed, state.step, 0, Purpose::Branching);
    let mut population: Vec<usize> = Vec::with_capacity(2 * m);
    for (k, e) in replica_energies.iter().enumerate() {
        let u: f64 = rng.random();
        let copies = ((-dtau * (e - e_ref)).exp() + u).floor();
        let copies = if copies.is_finite() { copies.clamp(0.0, 2.0 * m as f64) as usize } else { 0 };
        population.extend(std::iter::repeat_n(k, copies));
    }
    if population.is_empty() {
        return Err(Error::PopulationCollapse);
    }
    population.truncate(2 * m);

    let selected: Vec<usize> = if population.len() == m {
        population
    } else if population.len() > m {
        // Uniform subset without replacement, kept in replica order.
        let mut keep = rand::seq::index::sample(&mut rng, population.len(), m).into_vec();
        keep.sort_unstable();
        keep.into_iter().map(|p| population[p]).collect()
    } else {
        let base = population.len();
        let mut out = population.clone();
        for _ in base..m {
            out.push(population[rng.random_range(0..base)]);
        }
        out.sort_unstable();
        out
    };

    if selected.iter().enumerate().any(|(a, &b)| a != b) {
        let n_el = state.n_electrons();
        let mut waves = Vec::with_capacity(state.waves.len());
        for i in 0..n_el {
            for &k in &selected {
                waves.push(state.waves[i * m + k].clone());
            }
        }
        for cloud in &mut state.clouds {
            cloud.positions = selected.iter().map(|&k| cloud.positions[k]).collect();
        }
        state.waves = waves;
    }
    Ok(selected.iter().map(|&k| replica_energies[k]).sum::<f64>() / m as f64)
}
