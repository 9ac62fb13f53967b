//! Walker clouds, the Gaussian windowing kernel and the windowed
//! electron–electron potential felt by each guide wave.
//!
//! Guide wave `k` of electron `i` feels every other electron `j` through
//! that electron's walkers, weighted by a Gaussian window of width
//! `σ_j = α_j · std(cloud_j)` centred on walker `k` of electron `j`:
//!
//! ```text
//! V_i^k(x) = Σ_{j≠i} Σ_l v_ee(x − x_j^l) K(x_j^l, x_j^k) / Σ_l K(x_j^l, x_j^k)
//! ```
//!
//! A zero-width window gives the pairwise classical potential of walker `k`,
//! an infinite one the Monte Carlo Hartree potential of the whole cloud.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{sample_std, Grid1D};
use crate::par;
use crate::potentials::{v_ee, SoftCoreParams};

/// Kernel weights below this are treated as zero when truncating windows.
const WINDOW_REACH_SIGMAS: f64 = 8.0;

/// Positions of the `M` walkers of one electron. Walker `k` is paired with
/// guide wave `k` of the same electron and with walker `k` of every other
/// electron.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkerCloud {
    pub electron: usize,
    pub positions: Vec<f64>,
}

impl WalkerCloud {
    pub fn new(electron: usize, positions: Vec<f64>) -> Result<Self> {
        if positions.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("walker positions must be finite".into()));
        }
        Ok(Self { electron, positions })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn std(&self) -> f64 {
        sample_std(&self.positions)
    }
}

/// Optional extra factor on the correlation length, `σ_j^k ← σ_j^k · f(clouds, j, k)`.
/// Off by default; when set, windows become replica dependent and the
/// effective potential falls back to direct summation.
pub type SigmaScaling = fn(&[WalkerCloud], usize, usize) -> f64;

/// Correlation-length model: `σ_j^k = α_j · σ_j(t)`. `α_j = 0` selects the
/// pairwise limit, where the window keeps only the paired walker.
#[derive(Debug, Clone)]
pub struct KernelConfig {
    pub alpha: Vec<f64>,
    /// Current cloud spread per electron, already clamped to `sigma_floor`.
    pub sigma: Vec<f64>,
    /// Lower bound on `sigma`; zero means unset.
    pub sigma_floor: f64,
    pub scaling: Option<SigmaScaling>,
}

impl PartialEq for KernelConfig {
    fn eq(&self, other: &Self) -> bool {
        self.alpha == other.alpha
            && self.sigma == other.sigma
            && self.sigma_floor == other.sigma_floor
            && self.scaling.is_some() == other.scaling.is_some()
    }
}

impl KernelConfig {
    pub fn new(alpha: Vec<f64>, sigma_floor: f64) -> Result<Self> {
        if alpha.iter().any(|a| !(*a >= 0.0) || !a.is_finite()) {
            return Err(Error::InvalidParameter("alpha must be finite and nonnegative".into()));
        }
        if !(sigma_floor >= 0.0) {
            return Err(Error::InvalidParameter("sigma_floor must be nonnegative".into()));
        }
        let n = alpha.len();
        Ok(Self { alpha, sigma: vec![sigma_floor.max(1.0); n], sigma_floor, scaling: None })
    }

    /// Window width for replica `k` of electron `j`.
    pub fn sigma_jk(&self, clouds: &[WalkerCloud], j: usize, k: usize) -> f64 {
        let base = self.alpha[j] * self.sigma[j];
        match self.scaling {
            Some(f) => base * f(clouds, j, k),
            None => base,
        }
    }
}

/// Gaussian window `exp(−|x_l − x_k|² / 2σ²)`.
pub fn kernel_weight(x_l: f64, x_k: f64, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::NonPositiveSigma(sigma));
    }
    Ok(gauss(x_l - x_k, sigma))
}

#[inline]
fn gauss(d: f64, sigma: f64) -> f64 {
    (-(d * d) / (2.0 * sigma * sigma)).exp()
}

/// Window normalization `Z_j^k = Σ_l K(x_j^l, x_j^k, σ)`; at least 1 from
/// the self term.
pub fn partition_z(cloud: &WalkerCloud, k: usize, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::NonPositiveSigma(sigma));
    }
    let xk = cloud.positions[k];
    Ok(cloud.positions.iter().map(|&xl| gauss(xl - xk, sigma)).sum())
}

/// Refreshes `σ_j` for the electron owning `cloud` from the sample
/// standard deviation of its walkers.
pub fn update_sigma(cloud: &WalkerCloud, config: &KernelConfig) -> Result<KernelConfig> {
    let j = cloud.electron;
    if j >= config.sigma.len() {
        return Err(Error::InconsistentEnsembles(format!("no kernel entry for electron {j}")));
    }
    if cloud.len() < 2 {
        return Err(Error::InvalidParameter("need at least two walkers to estimate a spread".into()));
    }
    let std = cloud.std();
    if !(std > 0.0) && config.sigma_floor <= 0.0 {
        return Err(Error::DegenerateCloud);
    }
    let mut out = config.clone();
    out.sigma[j] = std.max(config.sigma_floor);
    Ok(out)
}

fn check_clouds(clouds: &[WalkerCloud], config: &KernelConfig, i: usize) -> Result<usize> {
    let m = clouds.first().map(|c| c.len()).unwrap_or(0);
    if i >= clouds.len() {
        return Err(Error::InconsistentEnsembles(format!("electron {i} out of range")));
    }
    if clouds.iter().any(|c| c.len() != m) || m == 0 {
        return Err(Error::InconsistentEnsembles("clouds must hold the same nonzero walker count".into()));
    }
    if config.alpha.len() != clouds.len() || config.sigma.len() != clouds.len() {
        return Err(Error::InconsistentEnsembles("kernel config does not match electron count".into()));
    }
    Ok(m)
}

/// Windowed e–e potential for guide wave `(i, k)` on `grid`, by direct
/// summation over every walker.
pub fn effective_potential(
    grid: &Grid1D,
    i: usize,
    k: usize,
    clouds: &[WalkerCloud],
    config: &KernelConfig,
    params: &SoftCoreParams,
) -> Result<Vec<f64>> {
    let m = check_clouds(clouds, config, i)?;
    if k >= m {
        return Err(Error::InconsistentEnsembles(format!("replica {k} out of range")));
    }
    let mut out = vec![0.0; grid.len()];
    for (j, cloud) in clouds.iter().enumerate() {
        if j == i {
            continue;
        }
        let sigma = config.sigma_jk(clouds, j, k);
        if sigma == 0.0 {
            accumulate_pair(grid, cloud.positions[k], params, &mut out);
            continue;
        }
        if !(sigma > 0.0) {
            return Err(Error::NonPositiveSigma(sigma));
        }
        accumulate_direct(grid, cloud, cloud.positions[k], sigma, params, &mut out);
    }
    Ok(out)
}

fn accumulate_pair(grid: &Grid1D, center: f64, params: &SoftCoreParams, out: &mut [f64]) {
    for (o, x) in out.iter_mut().zip(grid.points()) {
        *o += v_ee(x - center, params);
    }
}

fn accumulate_direct(
    grid: &Grid1D,
    cloud: &WalkerCloud,
    center: f64,
    sigma: f64,
    params: &SoftCoreParams,
    out: &mut [f64],
) {
    let weights: Vec<(f64, f64)> = cloud
        .positions
        .iter()
        .map(|&xl| (xl, gauss(xl - center, sigma)))
        .filter(|(_, w)| *w > 0.0)
        .collect();
    let z: f64 = weights.iter().map(|(_, w)| w).sum();
    for (g, x) in grid.points().enumerate() {
        let s: f64 = weights.iter().map(|(xl, w)| w * v_ee(x - xl, params)).sum();
        out[g] += s / z;
    }
}

/// Tabulated windowed potential of one electron's cloud as a function of the
/// window centre.
///
/// Walkers are deposited on the grid nodes (cloud-in-cell), the windowed
/// potential is tabulated for centres on a mesh of spacing
/// `min(dx, σ/4)` and linearly interpolated in the centre. The cost is
/// independent of the walker count, which makes it the workhorse for large
/// ensembles; [`effective_potential`] is the exact reference.
#[derive(Debug, Clone)]
pub struct KernelTable {
    grid: Grid1D,
    center_min: f64,
    center_step: f64,
    n_centers: usize,
    rows: Vec<Option<Vec<f64>>>,
}

impl KernelTable {
    /// Smallest σ (in grid spacings) the table handles; narrower windows
    /// use direct summation.
    pub const MIN_SIGMA_IN_DX: f64 = 0.5;

    pub fn applicable(grid: &Grid1D, sigma: f64) -> bool {
        sigma >= Self::MIN_SIGMA_IN_DX * grid.dx()
    }

    pub fn build(grid: &Grid1D, cloud: &WalkerCloud, sigma: f64, params: &SoftCoreParams) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(Error::NonPositiveSigma(sigma));
        }
        if cloud.is_empty() {
            return Err(Error::EmptySample);
        }
        let n = grid.len();
        let dx = grid.dx();

        let mut mass = vec![0.0; n];
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &x in &cloud.positions {
            let xc = x.clamp(grid.x_min(), grid.x_max());
            let (c, t) = grid.locate(xc).expect("clamped into grid");
            mass[c] += 1.0 - t;
            mass[c + 1] += t;
            lo = lo.min(xc);
            hi = hi.max(xc);
        }

        let center_step = dx.min(sigma / 4.0);
        let n_centers = (((hi - lo) / center_step).ceil() as usize + 1).max(2);
        let center_min = lo;

        let mut needed = vec![false; n_centers];
        for &x in &cloud.positions {
            let s = (x.clamp(grid.x_min(), grid.x_max()) - center_min) / center_step;
            let c = (s.floor().max(0.0) as usize).min(n_centers - 2);
            needed[c] = true;
            needed[c + 1] = true;
        }

        // Toeplitz kernel: v_ee at separation (g − b)·dx lives at index g − b + n − 1.
        let toeplitz: Vec<f64> = (0..2 * n - 1)
            .map(|d| v_ee((d as f64 - (n - 1) as f64) * dx, params))
            .collect();
        let occupied: Vec<usize> = (0..n).filter(|&b| mass[b] > 0.0).collect();
        let reach = WINDOW_REACH_SIGMAS * sigma;

        let rows = par::map_range(n_centers, |c| {
            if !needed[c] {
                return None;
            }
            let center = center_min + c as f64 * center_step;
            let mut row = vec![0.0; n];
            let mut z = 0.0;
            for &b in &occupied {
                let d = grid.x(b) - center;
                if d.abs() > reach {
                    continue;
                }
                let w = mass[b] * gauss(d, sigma);
                if w == 0.0 {
                    continue;
                }
                z += w;
                let kern = &toeplitz[n - 1 - b..2 * n - 1 - b];
                for (r, v) in row.iter_mut().zip(kern) {
                    *r += w * v;
                }
            }
            let inv = 1.0 / z;
            row.iter_mut().for_each(|r| *r *= inv);
            Some(row)
        });

        Ok(Self { grid: *grid, center_min, center_step, n_centers, rows })
    }

    /// Adds the windowed potential for a window centred at `center` to `out`.
    pub fn accumulate(&self, center: f64, out: &mut [f64]) {
        let center = center.clamp(self.grid.x_min(), self.grid.x_max());
        let s = (center - self.center_min) / self.center_step;
        let c = (s.floor().max(0.0) as usize).min(self.n_centers - 2);
        let t = (s - c as f64).clamp(0.0, 1.0);
        let (a, b) = (self.rows[c].as_ref(), self.rows[c + 1].as_ref());
        match (a, b) {
            (Some(a), Some(b)) => {
                for ((o, va), vb) in out.iter_mut().zip(a).zip(b) {
                    *o += va * (1.0 - t) + vb * t;
                }
            }
            _ => panic!("kernel table queried at a centre outside the tabulated cloud"),
        }
    }
}

/// Windowed potentials for every guide wave, `[i][k]`, each on `grid`.
///
/// Uses [`KernelTable`] when every window is replica independent and wide
/// enough to be resolved by the grid, direct summation otherwise.
pub fn effective_potentials_all(
    grid: &Grid1D,
    clouds: &[WalkerCloud],
    config: &KernelConfig,
    params: &SoftCoreParams,
) -> Result<Vec<Vec<Vec<f64>>>> {
    let m = check_clouds(clouds, config, 0)?;
    let n_el = clouds.len();
    let n = grid.len();
    if n_el == 1 || params.b == 0.0 {
        return Ok(vec![vec![vec![0.0; n]; m]; n_el]);
    }
    let tabulated = config.scaling.is_none()
        && (0..n_el).all(|j| {
            let sigma = config.sigma_jk(clouds, j, 0);
            sigma == 0.0 || KernelTable::applicable(grid, sigma)
        });
    if tabulated {
        // `None` marks a pairwise (α = 0) electron.
        let tables = (0..n_el)
            .map(|j| match config.sigma_jk(clouds, j, 0) {
                0.0 => Ok(None),
                s => KernelTable::build(grid, &clouds[j], s, params).map(Some),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((0..n_el)
            .map(|i| {
                par::map_range(m, |k| {
                    let mut v = vec![0.0; n];
                    for (j, table) in tables.iter().enumerate() {
                        if j == i {
                            continue;
                        }
                        let center = clouds[j].positions[k];
                        match table {
                            Some(t) => t.accumulate(center, &mut v),
                            None => accumulate_pair(grid, center, params, &mut v),
                        }
                    }
                    v
                })
            })
            .collect())
    } else {
        (0..n_el)
            .map(|i| {
                par::map_range(m, |k| effective_potential(grid, i, k, clouds, config, params))
                    .into_iter()
                    .collect::<Result<Vec<_>>>()
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    const HE: SoftCoreParams = SoftCoreParams::HELIUM;

    fn normal_cloud(electron: usize, m: usize, seed: u64, scale: f64) -> WalkerCloud {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let pos = (0..m)
            .map(|_| scale * Distribution::<f64>::sample(&StandardNormal, &mut rng))
            .collect();
        WalkerCloud::new(electron, pos).unwrap()
    }

    fn config(alpha: f64, clouds: &[WalkerCloud]) -> KernelConfig {
        let mut cfg = KernelConfig::new(vec![alpha; clouds.len()], 1e-3).unwrap();
        for c in clouds {
            cfg = update_sigma(c, &cfg).unwrap();
        }
        cfg
    }

    #[test]
    fn kernel_weight_values() {
        assert_eq!(kernel_weight(0.7, 0.7, 0.3).unwrap(), 1.0);
        assert_abs_diff_eq!(kernel_weight(1.5, 1.0, 0.5).unwrap(), (-0.5f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(kernel_weight(-3.0, 4.0, 1e9).unwrap(), 1.0, epsilon = 1e-12);
        assert_eq!(kernel_weight(0.0, 1.0, 0.0), Err(Error::NonPositiveSigma(0.0)));
    }

    #[test]
    fn partition_function_limits() {
        let single = WalkerCloud::new(0, vec![0.4]).unwrap();
        assert_eq!(partition_z(&single, 0, 0.1).unwrap(), 1.0);
        let cloud = normal_cloud(0, 50, 3, 1.0);
        assert_abs_diff_eq!(partition_z(&cloud, 7, 1e12).unwrap(), 50.0, epsilon = 1e-9);
        let z = partition_z(&cloud, 7, 0.5).unwrap();
        assert!((1.0..=50.0).contains(&z));
    }

    #[test]
    fn partition_function_matches_brute_force() {
        let mut cloud = normal_cloud(0, 100, 11, 1.0);
        cloud.positions[0] = 0.0;
        let mut brute = 0.0;
        for l in 0..100 {
            let d = cloud.positions[l];
            brute += (-d * d / 2.0).exp();
        }
        assert_abs_diff_eq!(partition_z(&cloud, 0, 1.0).unwrap(), brute, epsilon = 1e-12);
    }

    #[test]
    fn sigma_update_two_points() {
        let cloud = WalkerCloud::new(0, vec![-1.0, 1.0]).unwrap();
        let cfg = update_sigma(&cloud, &KernelConfig::new(vec![1.0], 1e-3).unwrap()).unwrap();
        assert_abs_diff_eq!(cfg.sigma_jk(&[cloud], 0, 0), 2f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn sigma_update_floor_and_degenerate() {
        let cloud = WalkerCloud::new(0, vec![0.5; 10]).unwrap();
        let cfg = update_sigma(&cloud, &KernelConfig::new(vec![0.7], 1e-3).unwrap()).unwrap();
        assert_abs_diff_eq!(cfg.sigma_jk(std::slice::from_ref(&cloud), 0, 3), 0.7e-3, epsilon = 1e-15);
        let unset = KernelConfig::new(vec![1.0], 0.0).unwrap();
        assert_eq!(update_sigma(&cloud, &unset), Err(Error::DegenerateCloud));
    }

    #[test]
    fn sigma_of_normal_sample() {
        let cloud = normal_cloud(0, 10_000, 5, 1.0);
        let cfg = update_sigma(&cloud, &KernelConfig::new(vec![1.0], 1e-3).unwrap()).unwrap();
        assert!((cfg.sigma[0] - 1.0).abs() < 0.03);
    }

    #[test]
    fn single_walker_gives_pair_potential() {
        let grid = Grid1D::symmetric(10.0, 0.1).unwrap();
        let clouds = vec![
            WalkerCloud::new(0, vec![0.3]).unwrap(),
            WalkerCloud::new(1, vec![-1.2]).unwrap(),
        ];
        let cfg = KernelConfig { sigma: vec![1.0, 1.0], ..KernelConfig::new(vec![1.0, 1.0], 1e-3).unwrap() };
        let v = effective_potential(&grid, 0, 0, &clouds, &cfg, &HE).unwrap();
        for (x, vx) in grid.points().zip(&v) {
            assert_abs_diff_eq!(*vx, v_ee(x + 1.2, &HE), epsilon = 1e-15);
        }
    }

    #[test]
    fn narrow_window_is_classical_pair_potential() {
        let grid = Grid1D::symmetric(10.0, 0.1).unwrap();
        let clouds = vec![normal_cloud(0, 200, 1, 1.0), normal_cloud(1, 200, 2, 1.0)];
        let cfg = config(1e-12, &clouds);
        for k in [0, 17, 123] {
            let v = effective_potential(&grid, 0, k, &clouds, &cfg, &HE).unwrap();
            let x2 = clouds[1].positions[k];
            for (x, vx) in grid.points().zip(&v) {
                assert_eq!(*vx, v_ee(x - x2, &HE));
            }
        }
    }

    #[test]
    fn zero_alpha_is_exact_pair_potential_on_both_routes() {
        let grid = Grid1D::symmetric(10.0, 0.1).unwrap();
        let clouds = vec![normal_cloud(0, 200, 3, 1.0), normal_cloud(1, 200, 4, 1.0)];
        let cfg = config(0.0, &clouds);
        let all = effective_potentials_all(&grid, &clouds, &cfg, &HE).unwrap();
        for k in [0, 77, 199] {
            let direct = effective_potential(&grid, 1, k, &clouds, &cfg, &HE).unwrap();
            let x1 = clouds[0].positions[k];
            for ((x, a), b) in grid.points().zip(&direct).zip(&all[1][k]) {
                assert_eq!(*a, v_ee(x - x1, &HE));
                assert_eq!(*b, *a);
            }
        }
        assert!(KernelConfig::new(vec![-1.0, 1.0], 1e-3).is_err());
    }

    #[test]
    fn wide_window_is_cloud_average() {
        let grid = Grid1D::symmetric(10.0, 0.1).unwrap();
        let clouds = vec![normal_cloud(0, 300, 1, 1.0), normal_cloud(1, 300, 2, 1.3)];
        let cfg = config(1e9, &clouds);
        let v = effective_potential(&grid, 1, 42, &clouds, &cfg, &HE).unwrap();
        for (x, vx) in grid.points().zip(&v) {
            let mean: f64 = clouds[0].positions.iter().map(|xl| v_ee(x - xl, &HE)).sum::<f64>() / 300.0;
            assert_abs_diff_eq!(*vx, mean, epsilon = 1e-12);
        }
    }

    #[test]
    fn windowed_potential_is_a_convex_combination() {
        let grid = Grid1D::symmetric(10.0, 0.2).unwrap();
        let clouds = vec![normal_cloud(0, 150, 8, 1.0), normal_cloud(1, 150, 9, 1.0)];
        for alpha in [0.1, 0.5, 2.0] {
            let cfg = config(alpha, &clouds);
            let v = effective_potential(&grid, 0, 5, &clouds, &cfg, &HE).unwrap();
            for (x, vx) in grid.points().zip(&v) {
                let pair: Vec<f64> = clouds[1].positions.iter().map(|xl| v_ee(x - xl, &HE)).collect();
                let lo = pair.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = pair.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                assert!(*vx >= lo - 1e-14 && *vx <= hi + 1e-14);
                assert!(*vx > 0.0 && *vx <= 1.0);
            }
        }
    }

    #[test]
    fn inconsistent_clouds_rejected() {
        let grid = Grid1D::symmetric(5.0, 0.5).unwrap();
        let clouds = vec![
            WalkerCloud::new(0, vec![0.0, 1.0]).unwrap(),
            WalkerCloud::new(1, vec![0.0]).unwrap(),
        ];
        let cfg = KernelConfig::new(vec![1.0, 1.0], 1e-3).unwrap();
        assert!(matches!(
            effective_potential(&grid, 0, 0, &clouds, &cfg, &HE),
            Err(Error::InconsistentEnsembles(_))
        ));
    }

    #[test]
    fn table_matches_direct_summation() {
        let grid = Grid1D::symmetric(20.0, 0.15).unwrap();
        let clouds = vec![normal_cloud(0, 2000, 21, 1.2), normal_cloud(1, 2000, 22, 1.2)];
        for alpha in [0.5, 1.0, 1e4] {
            let cfg = config(alpha, &clouds);
            let all = effective_potentials_all(&grid, &clouds, &cfg, &HE).unwrap();
            for k in [0, 999, 1500] {
                let direct = effective_potential(&grid, 0, k, &clouds, &cfg, &HE).unwrap();
                let worst = direct
                    .iter()
                    .zip(&all[0][k])
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                assert!(worst < 2e-3, "alpha {alpha} k {k}: {worst}");
            }
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]
            #[test]
            fn permutation_invariance(
                pos in prop::collection::vec(-4.0f64..4.0, 3..20),
                other in prop::collection::vec(-4.0f64..4.0, 3..20),
                alpha in 0.05f64..5.0,
            ) {
                let m = pos.len().min(other.len());
                let grid = Grid1D::symmetric(6.0, 0.25).unwrap();
                let c0 = WalkerCloud::new(0, pos[..m].to_vec()).unwrap();
                let c1 = WalkerCloud::new(1, other[..m].to_vec()).unwrap();
                let clouds = vec![c0.clone(), c1.clone()];
                let cfg = config(alpha, &clouds);
                let v = effective_potential(&grid, 0, 0, &clouds, &cfg, &HE).unwrap();
                // Permute walkers l ≥ 1 of cloud 1, keeping replica 0 in place.
                let mut perm = c1.positions.clone();
                perm[1..].reverse();
                let clouds2 = vec![c0, WalkerCloud::new(1, perm).unwrap()];
                let v2 = effective_potential(&grid, 0, 0, &clouds2, &cfg, &HE).unwrap();
                for (a, b) in v.iter().zip(&v2) {
                    prop_assert!((a - b).abs() < 1e-12);
                }
            }

            #[test]
            fn partition_function_bounds(pos in prop::collection::vec(-4.0f64..4.0, 1..40), sigma in 1e-3f64..10.0) {
                let c = WalkerCloud::new(0, pos.clone()).unwrap();
                let z = partition_z(&c, 0, sigma).unwrap();
                prop_assert!(z >= 1.0 && z <= pos.len() as f64 + 1e-12);
            }
        }
    }
}
