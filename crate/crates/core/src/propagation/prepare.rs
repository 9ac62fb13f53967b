use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::imaginary::{branch_resample, imaginary_time_step, ImaginaryTimeOptions};
use super::{EnsembleState, TimeStepConfig};
use crate::error::{Error, Result};
use crate::grid::{Grid1D, WaveFn1D};
use crate::onebody::soft_core_ground_state;
use crate::potentials::SoftCoreParams;
use crate::rng::{stream, Purpose};
use crate::walkers::{KernelConfig, WalkerCloud};

/// Everything needed to prepare a correlated ground state.
#[derive(Debug, Clone, PartialEq)]
pub struct PrepConfig {
    pub grid: Grid1D,
    pub params: SoftCoreParams,
    pub n_electrons: usize,
    pub n_walkers: usize,
    /// Correlation-length multiplier per electron.
    pub alpha: Vec<f64>,
    pub sigma_floor: f64,
    pub steps: TimeStepConfig,
    pub seed: u64,
    /// Convergence threshold on the change of the windowed mean energy.
    pub tol_energy: f64,
    /// Window length (steps) for the convergence test.
    pub window: usize,
    pub branching: bool,
    /// Branching runs while `τ < branch_until · tau_total`.
    pub branch_until: f64,
    pub metropolis: bool,
}

impl PrepConfig {
    pub fn new(grid: Grid1D, params: SoftCoreParams, n_walkers: usize, alpha: f64, seed: u64) -> Self {
        Self {
            grid,
            params,
            n_electrons: 2,
            n_walkers,
            alpha: vec![alpha; 2],
            sigma_floor: 1e-3,
            steps: TimeStepConfig::default(),
            seed,
            tol_energy: 2e-3,
            window: 50,
            branching: true,
            branch_until: 0.5,
            metropolis: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.steps.validate()?;
        if self.n_electrons == 0 || self.alpha.len() != self.n_electrons {
            return Err(Error::InvalidParameter("alpha must list one value per electron".into()));
        }
        if self.n_walkers < 2 {
            return Err(Error::InvalidParameter("need at least two walkers".into()));
        }
        if self.window == 0 {
            return Err(Error::InvalidParameter("convergence window must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub tau: f64,
    pub e_mean: f64,
    pub e_std: f64,
}

#[derive(Debug, Clone)]
pub struct PrepResult {
    pub state: EnsembleState,
    /// Ground-state energy, mean over the final convergence window.
    pub energy: f64,
    /// Standard error of the final-step replica energies.
    pub energy_error: f64,
    /// Mean pair repulsion `⟨v_ee(x_1^k − x_2^k)⟩` over replicas at the end.
    pub ee_energy: f64,
    pub ee_error: f64,
    pub trace: Vec<TracePoint>,
}

/// Draws `n` positions from a grid density by inverting its piecewise-linear
/// cumulative distribution.
pub(crate) fn sample_inverse_cdf(grid: &Grid1D, density: &[f64], n: usize, rng: &mut impl Rng) -> Vec<f64> {
    let len = density.len();
    let mut cdf = vec![0.0; len];
    for i in 1..len {
        cdf[i] = cdf[i - 1] + 0.5 * (density[i - 1] + density[i]) * grid.dx();
    }
    let total = cdf[len - 1];
    (0..n)
        .map(|_| {
            let u = rng.random::<f64>() * total;
            let i = cdf.partition_point(|&c| c < u).clamp(1, len - 1);
            let (c0, c1) = (cdf[i - 1], cdf[i]);
            let t = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.5 };
            grid.x(i - 1) + t * grid.dx()
        })
        .collect()
}

/// Replica energies `Σ_i E_L(i,k) − Σ_{i<j} v_ee(x_i^k − x_j^k)`: the
/// one-body local energies each carry the full pair term, so it is removed
/// once.
fn replica_total_energies(state: &EnsembleState, local_sum: &[f64], params: &SoftCoreParams) -> Vec<f64> {
    local_sum
        .iter()
        .enumerate()
        .map(|(k, e)| e - state.pair_energy(k, params))
        .collect()
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, var.sqrt())
}

/// Initial ensemble: every guide wave is the one-electron soft-core ground
/// state and the walkers of each electron are drawn from its density.
pub fn initial_ensemble(cfg: &PrepConfig) -> Result<EnsembleState> {
    let bare = SoftCoreParams { a: cfg.params.a, b: 0.0 };
    let (phi, _) = soft_core_ground_state(&cfg.grid, &bare)?;
    let density: Vec<f64> = phi.values.iter().map(Complex64::norm_sqr).collect();
    let m = cfg.n_walkers;
    let clouds = (0..cfg.n_electrons)
        .map(|i| {
            let mut rng = stream(cfg.seed, 0, i as u64, Purpose::InitialSampling);
            WalkerCloud::new(i, sample_inverse_cdf(&cfg.grid, &density, m, &mut rng))
        })
        .collect::<Result<Vec<_>>>()?;
    let waves: Vec<WaveFn1D> = std::iter::repeat_n(phi, cfg.n_electrons * m).collect();
    let kernel = KernelConfig::new(cfg.alpha.clone(), cfg.sigma_floor)?;
    let mut state = EnsembleState::new(cfg.grid, waves, clouds, kernel)?;
    state.refresh_sigma()?;
    Ok(state)
}

/// Imaginary-time preparation of the correlated ground state.
///
/// Each step relaxes the guide waves, moves the walkers with annealed noise
/// of variance `exp(−τ/anneal_tau)`, refreshes the cloud spreads and, early
/// on, resamples replicas by their local energy. The run stops once the mean
/// energy over one window differs from the previous window by less than
/// `tol_energy`; convergence is only tested after three annealing times.
pub fn prepare_ground_state(cfg: &PrepConfig) -> Result<PrepResult> {
    cfg.validate()?;
    let mut state = initial_ensemble(cfg)?;
    let dtau = cfg.steps.dtau_imag;
    let anneal = cfg.steps.anneal_tau();
    let max_steps = (cfg.steps.tau_total / dtau).round() as usize;
    let settle = (3.0 * anneal).min(cfg.steps.tau_total);
    let branch_stop = cfg.branch_until * cfg.steps.tau_total;
    let m = cfg.n_walkers;

    let mut trace = Vec::with_capacity(max_steps);
    let mut e_ref: Option<f64> = None;
    let mut last_change = f64::INFINITY;
    let mut last_std;

    for n in 0..max_steps {
        let tau = n as f64 * dtau;
        let opts = ImaginaryTimeOptions {
            dtau,
            noise_variance: (-tau / anneal).exp(),
            metropolis: cfg.metropolis,
            seed: cfg.seed,
        };
        let report = imaginary_time_step(&mut state, &cfg.params, &opts)?;
        state.refresh_sigma()?;
        let local_sum = report.replica_energies(cfg.n_electrons);
        let totals = replica_total_energies(&state, &local_sum, &cfg.params);
        let (e_mean, e_std) = mean_std(&totals);
        last_std = e_std;
        trace.push(TracePoint { tau: tau + dtau, e_mean, e_std });

        if cfg.branching && tau < branch_stop {
            let reference = *e_ref.get_or_insert_with(|| local_sum.iter().sum::<f64>() / m as f64);
            let reference = branch_resample(&mut state, &local_sum, reference, dtau, cfg.seed)?;
            e_ref = Some(reference);
        }

        let w = cfg.window;
        if tau + dtau >= settle && trace.len() >= 2 * w {
            let tail = &trace[trace.len() - 2 * w..];
            let prev = tail[..w].iter().map(|p| p.e_mean).sum::<f64>() / w as f64;
            let last = tail[w..].iter().map(|p| p.e_mean).sum::<f64>() / w as f64;
            last_change = (last - prev).abs();
            if last_change < cfg.tol_energy {
                let pairs: Vec<f64> = (0..m).map(|k| state.pair_energy(k, &cfg.params)).collect();
                let (ee, ee_std) = mean_std(&pairs);
                let sqrt_m = (m as f64).sqrt();
                // The prepared state starts the real-time clock.
                state.t = 0.0;
                state.step = 0;
                return Ok(PrepResult {
                    state,
                    energy: last,
                    energy_error: last_std / sqrt_m,
                    ee_energy: ee,
                    ee_error: ee_std / sqrt_m,
                    trace,
                });
            }
        }
    }
    Err(Error::NoConvergence { steps: max_steps, last_change })
}

/// Ground-state energies over a grid of correlation-length multipliers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub alpha: f64,
    pub energy: f64,
    pub energy_error: f64,
    pub ee_energy: f64,
    pub ee_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaScan {
    /// One row per grid point, in input order.
    pub rows: Vec<ScanRow>,
    pub best_alpha: f64,
    pub best_energy: f64,
}

/// Runs [`prepare_ground_state`] for each α (0 is the pairwise limit) with the same seed and returns
/// the minimizing α (ties go to the smaller α).
pub fn alpha_scan(cfg: &PrepConfig, alpha_grid: &[f64]) -> Result<AlphaScan> {
    if alpha_grid.is_empty() || alpha_grid.iter().any(|a| !(*a >= 0.0) || !a.is_finite()) {
        return Err(Error::InvalidParameter("alpha grid must be nonempty and nonnegative".into()));
    }
    let mut rows = Vec::with_capacity(alpha_grid.len());
    for &alpha in alpha_grid {
        let run_cfg = PrepConfig { alpha: vec![alpha; cfg.n_electrons], ..cfg.clone() };
        let res = prepare_ground_state(&run_cfg)?;
        log::info!("alpha = {alpha}: E0 = {:.6} ± {:.6}", res.energy, res.energy_error);
        rows.push(ScanRow {
            alpha,
            energy: res.energy,
            energy_error: res.energy_error,
            ee_energy: res.ee_energy,
            ee_error: res.ee_error,
        });
    }
    let (best_alpha, best_energy) = rows.iter().fold((f64::NAN, f64::INFINITY), |best, row| {
        if row.energy < best.1 || (row.energy == best.1 && row.alpha < best.0) {
            (row.alpha, row.energy)
        } else {
            best
        }
    });
    Ok(AlphaScan { rows, best_alpha, best_energy })
}
