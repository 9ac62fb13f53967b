//! Quantities measured on either engine: one-electron density matrices,
//! coherence, survival probability, pair-separation density and
//! trajectory-bundle comparisons.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{kde_estimate, l1_distance, Density1D, Grid1D, WaveFn1D};
use crate::par;
use crate::walkers::WalkerCloud;

/// Discretized one-electron density matrix `ρ(x, x′)`, row-major in `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    pub grid: Grid1D,
    pub values: Vec<Complex64>,
}

impl DensityMatrix {
    #[inline]
    pub fn n(&self) -> usize {
        self.grid.len()
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> Complex64 {
        self.values[i * self.n() + j]
    }

    pub fn diagonal(&self) -> Density1D {
        let values = (0..self.n()).map(|i| self.at(i, i).re).collect();
        Density1D { grid: self.grid, values }
    }

    pub fn trace(&self) -> f64 {
        self.diagonal().integral()
    }

    /// `max |ρ(x, x′) − ρ*(x′, x)|`.
    pub fn hermiticity_error(&self) -> f64 {
        let n = self.n();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.at(i, j) - self.at(j, i).conj()).norm());
            }
        }
        worst
    }

    /// `Tr(ρ²) = ∫∫ |ρ(x, x′)|² dx dx′` for a Hermitian matrix.
    pub fn purity(&self) -> f64 {
        let n = self.n();
        let w: Vec<f64> = (0..n).map(|i| self.grid.weight(i)).collect();
        let rows = par::map_range(n, |i| {
            let row = &self.values[i * n..(i + 1) * n];
            row.iter().zip(&w).map(|(v, wj)| v.norm_sqr() * wj).sum::<f64>() * w[i]
        });
        rows.iter().sum()
    }

    /// Rayleigh quotient `⟨v|ρ|v⟩ / ⟨v|v⟩` with quadrature weights.
    pub fn rayleigh(&self, v: &[Complex64]) -> f64 {
        let n = self.n();
        let w: Vec<f64> = (0..n).map(|i| self.grid.weight(i)).collect();
        let mut num = Complex64::new(0.0, 0.0);
        let mut den = 0.0;
        for i in 0..n {
            let mut row = Complex64::new(0.0, 0.0);
            for j in 0..n {
                row += self.at(i, j) * v[j] * w[j];
            }
            num += v[i].conj() * row * w[i];
            den += v[i].norm_sqr() * w[i];
        }
        num.re / den
    }
}

pub fn purity(rho: &DensityMatrix) -> f64 {
    rho.purity()
}

/// `ρ(x, x′) = (1/M) Σ_k φ_k*(x) φ_k(x′)` over the guide waves of one electron.
pub fn ensemble_density_matrix(waves: &[WaveFn1D]) -> Result<DensityMatrix> {
    let first = waves.first().ok_or(Error::EmptyEnsemble)?;
    let grid = first.grid;
    for w in waves {
        grid.ensure_same(&w.grid)?;
    }
    let n = grid.len();
    let share = 1.0 / waves.len() as f64;
    let rows = par::map_range(n, |i| {
        let mut row = vec![Complex64::new(0.0, 0.0); n - i];
        for w in waves {
            let a = w.values[i].conj() * share;
            for (r, b) in row.iter_mut().zip(&w.values[i..]) {
                *r += a * b;
            }
        }
        row
    });
    let mut values = vec![Complex64::new(0.0, 0.0); n * n];
    for (i, row) in rows.into_iter().enumerate() {
        for (off, v) in row.into_iter().enumerate() {
            let j = i + off;
            values[i * n + j] = v;
            values[j * n + i] = v.conj();
        }
    }
    Ok(DensityMatrix { grid, values })
}

/// How the anti-diagonal of `ρ` is reduced to a single coherence number.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoherenceMode {
    /// `|Σ ρ(x, −x) dx|`
    #[default]
    ModulusOfSum,
    /// `Σ |ρ(x, −x)| dx`
    SumOfModulus,
}

/// Unnormalized anti-diagonal measure of `rho`.
pub fn coherence_raw(rho: &DensityMatrix, mode: CoherenceMode) -> Result<f64> {
    if !rho.grid.is_symmetric() {
        return Err(Error::AsymmetricGrid);
    }
    let g = rho.grid;
    let terms = (0..rho.n()).map(|i| (rho.at(i, g.mirror(i)), g.weight(i)));
    Ok(match mode {
        CoherenceMode::ModulusOfSum => terms.map(|(v, w)| v * w).sum::<Complex64>().norm(),
        CoherenceMode::SumOfModulus => terms.map(|(v, w)| v.norm() * w).sum(),
    })
}

/// Coherence `|Σ_x ρ(x, −x) dx|`, divided by `reference` when given.
pub fn coherence(rho: &DensityMatrix, reference: Option<f64>) -> Result<f64> {
    coherence_with(rho, reference, CoherenceMode::ModulusOfSum)
}

pub fn coherence_with(rho: &DensityMatrix, reference: Option<f64>, mode: CoherenceMode) -> Result<f64> {
    let raw = coherence_raw(rho, mode)?;
    match reference {
        Some(r) if r > 0.0 => Ok(raw / r),
        Some(r) => Err(Error::InvalidParameter(format!("coherence reference must be positive, got {r}"))),
        None => Ok(raw),
    }
}

/// `∫_{lo}^{hi}` of the piecewise-linear interpolant of `values`.
fn integrate_between(grid: &Grid1D, values: &[f64], lo: f64, hi: f64) -> f64 {
    let dx = grid.dx();
    let mut total = 0.0;
    for i in 0..grid.len() - 1 {
        let (a, b) = (grid.x(i), grid.x(i) + dx);
        let (s, e) = (a.max(lo), b.min(hi));
        if e <= s {
            continue;
        }
        let f = |x: f64| values[i] + (values[i + 1] - values[i]) * (x - a) / dx;
        total += 0.5 * (f(s) + f(e)) * (e - s);
    }
    total
}

/// Probability `∫_{|x|<x_bound} ρ(x, x) dx` of finding the electron near the nucleus.
pub fn survival_probability(rho: &DensityMatrix, x_bound: f64) -> Result<f64> {
    survival_from_density(&rho.diagonal(), x_bound)
}

pub fn survival_from_density(density: &Density1D, x_bound: f64) -> Result<f64> {
    let g = density.grid;
    if !(x_bound > 0.0) || !g.contains(-x_bound) || !g.contains(x_bound) {
        return Err(Error::BoundOutsideGrid(x_bound));
    }
    Ok(integrate_between(&g, &density.values, -x_bound, x_bound))
}

/// Kernel density estimate of the pair separation `|x_1^k − x_2^k|` on `u_grid`.
pub fn pair_density(c1: &WalkerCloud, c2: &WalkerCloud, bandwidth: f64, u_grid: &Grid1D) -> Result<Density1D> {
    if c1.len() != c2.len() {
        return Err(Error::InconsistentEnsembles(format!(
            "clouds hold {} and {} walkers",
            c1.len(),
            c2.len()
        )));
    }
    let seps: Vec<f64> = c1.positions.iter().zip(&c2.positions).map(|(a, b)| (a - b).abs()).collect();
    kde_estimate(&seps, bandwidth, u_grid)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    Tdqmc,
    Exact,
}

impl Engine {
    pub fn as_str(&self) -> &'static str {
        match self {
            Engine::Tdqmc => "tdqmc",
            Engine::Exact => "exact",
        }
    }
}

/// One observable sampled in time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservableSeries {
    pub label: String,
    pub engine: Engine,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl ObservableSeries {
    pub fn new(label: impl Into<String>, engine: Engine) -> Self {
        Self { label: label.into(), engine, times: Vec::new(), values: Vec::new() }
    }

    /// Appends a sample; times must increase strictly.
    pub fn push(&mut self, t: f64, value: f64) -> Result<()> {
        if let Some(&last) = self.times.last() {
            if t <= last {
                return Err(Error::InvalidParameter(format!(
                    "series {} times must increase: {t} after {last}",
                    self.label
                )));
            }
        }
        self.times.push(t);
        self.values.push(value);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Copy divided by the first value.
    pub fn normalized_to_first(&self) -> Result<Self> {
        let first = *self.values.first().ok_or(Error::EmptySample)?;
        if first == 0.0 {
            return Err(Error::InvalidParameter(format!("series {} starts at zero", self.label)));
        }
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v /= first);
        Ok(out)
    }

    /// `max_t |self − other|`; both series must share time stamps.
    pub fn max_abs_deviation(&self, other: &Self) -> Result<f64> {
        self.check_aligned(other)?;
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
    }

    fn check_aligned(&self, other: &Self) -> Result<()> {
        let same = self.len() == other.len()
            && self.times.iter().zip(&other.times).all(|(a, b)| (a - b).abs() <= 1e-9 * (1.0 + a.abs()));
        if same {
            Ok(())
        } else {
            Err(Error::LengthMismatch(format!(
                "series {} and {} have different time stamps",
                self.label, other.label
            )))
        }
    }
}

/// Times at which a decreasing series (e.g. survival) drops in distinct steps.
///
/// The loss rate `−dS/dt` is smoothed by a moving average of `smooth` samples;
/// a step is a local maximum of the rate that exceeds `threshold` times the
/// largest rate, lies at least `min_separation` after the previous step, and
/// is separated from it by a dip below half of the smaller peak.
pub fn detect_steps(series: &ObservableSeries, smooth: usize, threshold: f64, min_separation: f64) -> Vec<f64> {
    let n = series.len();
    if n < 3 {
        return Vec::new();
    }
    let (t, s) = (&series.times, &series.values);
    let rate: Vec<f64> = (0..n)
        .map(|i| {
            let (a, b) = (i.saturating_sub(1), (i + 1).min(n - 1));
            -(s[b] - s[a]) / (t[b] - t[a])
        })
        .collect();
    let half = smooth / 2;
    let smoothed: Vec<f64> = (0..n)
        .map(|i| {
            let (a, b) = (i.saturating_sub(half), (i + half).min(n - 1));
            rate[a..=b].iter().sum::<f64>() / (b - a + 1) as f64
        })
        .collect();
    let top = smoothed.iter().cloned().fold(0.0, f64::max);
    if top <= 0.0 {
        return Vec::new();
    }
    let mut peaks: Vec<usize> = Vec::new();
    for i in 1..n - 1 {
        let r = smoothed[i];
        if r < threshold * top || r < smoothed[i - 1] || r < smoothed[i + 1] {
            continue;
        }
        match peaks.last() {
            Some(&p) if t[i] - t[p] < min_separation => {
                if r > smoothed[p] {
                    *peaks.last_mut().unwrap() = i;
                }
            }
            Some(&p) => {
                let dip = smoothed[p..=i].iter().cloned().fold(f64::INFINITY, f64::min);
                if dip < 0.5 * r.min(smoothed[p]) {
                    peaks.push(i);
                } else if r > smoothed[p] {
                    *peaks.last_mut().unwrap() = i;
                }
            }
            None => peaks.push(i),
        }
    }
    peaks.into_iter().map(|i| t[i]).collect()
}

/// Trajectories sampled on shared time stamps; `paths[j][n]` is trajectory
/// `j` at `times[n]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryBundle {
    pub times: Vec<f64>,
    pub paths: Vec<Vec<f64>>,
}

impl TrajectoryBundle {
    pub fn new(times: Vec<f64>, paths: Vec<Vec<f64>>) -> Result<Self> {
        if let Some(bad) = paths.iter().position(|p| p.len() != times.len()) {
            return Err(Error::LengthMismatch(format!(
                "trajectory {bad} has {} samples, expected {}",
                paths[bad].len(),
                times.len()
            )));
        }
        Ok(Self { times, paths })
    }

    pub fn final_positions(&self) -> Vec<f64> {
        self.paths.iter().filter_map(|p| p.last().copied()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BundleComparison {
    /// RMS over time of each trajectory's deviation.
    pub rms_per_trajectory: Vec<f64>,
    /// RMS over trajectories of the deviation at each time stamp.
    pub deviation_series: Vec<f64>,
    pub mean_rms: f64,
    pub final_l1: f64,
}

/// Pointwise comparison of two bundles started from the same walkers plus
/// the L1 distance of their final-position KDEs.
pub fn trajectory_bundle_compare(
    tdqmc: &TrajectoryBundle,
    exact: &TrajectoryBundle,
    grid: &Grid1D,
    bandwidth: f64,
) -> Result<BundleComparison> {
    if tdqmc.paths.len() != exact.paths.len() || tdqmc.times.len() != exact.times.len() {
        return Err(Error::LengthMismatch(format!(
            "bundles of {}x{} and {}x{} samples",
            tdqmc.paths.len(),
            tdqmc.times.len(),
            exact.paths.len(),
            exact.times.len()
        )));
    }
    if tdqmc.paths.is_empty() || tdqmc.times.is_empty() {
        return Err(Error::EmptySample);
    }
    let nt = tdqmc.times.len();
    let rms_per_trajectory: Vec<f64> = tdqmc
        .paths
        .iter()
        .zip(&exact.paths)
        .map(|(a, b)| (a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / nt as f64).sqrt())
        .collect();
    let deviation_series = (0..nt)
        .map(|n| {
            let ss: f64 = tdqmc.paths.iter().zip(&exact.paths).map(|(a, b)| (a[n] - b[n]).powi(2)).sum();
            (ss / tdqmc.paths.len() as f64).sqrt()
        })
        .collect();
    let mean_rms = rms_per_trajectory.iter().sum::<f64>() / rms_per_trajectory.len() as f64;
    let p = kde_estimate(&tdqmc.final_positions(), bandwidth, grid)?;
    let q = kde_estimate(&exact.final_positions(), bandwidth, grid)?;
    Ok(BundleComparison { rms_per_trajectory, deviation_series, mean_rms, final_l1: l1_distance(&p, &q)? })
}
