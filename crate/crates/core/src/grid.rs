//! Uniform grids, wavefunction storage, densities and kernel density estimation.
//!
//! Every integral in the crate goes through [`Grid1D::integrate`], the
//! trapezoid rule on the uniform mesh.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest squared norm accepted by [`WaveFn1D::normalize`].
pub const NORM_FLOOR: f64 = 1e-280;

/// Uniform 1D grid including both end points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    x_min: f64,
    x_max: f64,
    n_points: usize,
}

impl Grid1D {
    pub fn new(x_min: f64, x_max: f64, n_points: usize) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite()) || x_min >= x_max {
            return Err(Error::InvalidGrid(format!(
                "need x_min < x_max, got [{x_min}, {x_max}]"
            )));
        }
        if n_points < 8 {
            return Err(Error::InvalidGrid(format!(
                "need at least 8 points, got {n_points}"
            )));
        }
        Ok(Self { x_min, x_max, n_points })
    }

    /// Grid over `[x_min, x_max]` with spacing as close as possible to `dx`
    /// (the point count is rounded).
    pub fn with_spacing(x_min: f64, x_max: f64, dx: f64) -> Result<Self> {
        if !(dx > 0.0) {
            return Err(Error::InvalidGrid(format!("spacing must be positive, got {dx}")));
        }
        let n = ((x_max - x_min) / dx).round() as usize + 1;
        Self::new(x_min, x_max, n)
    }

    /// Symmetric grid `[-half_width, half_width]`.
    pub fn symmetric(half_width: f64, dx: f64) -> Result<Self> {
        Self::with_spacing(-half_width, half_width, dx)
    }

    #[inline]
    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    #[inline]
    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n_points
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.n_points - 1) as f64
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx()
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        let dx = self.dx();
        (0..self.n_points).map(move |i| self.x_min + i as f64 * dx)
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.x_min && x <= self.x_max
    }

    /// True when the grid is its own mirror image about x = 0.
    pub fn is_symmetric(&self) -> bool {
        (self.x_min + self.x_max).abs() <= 1e-9 * self.dx()
    }

    /// Index of the mirrored point, for symmetric grids.
    #[inline]
    pub fn mirror(&self, i: usize) -> usize {
        self.n_points - 1 - i
    }

    /// Cell index `i` and fractional offset `t` in `[0, 1]` such that
    /// `x = x(i) + t * dx`. Returns `None` outside the grid.
    #[inline]
    pub fn locate(&self, x: f64) -> Option<(usize, f64)> {
        if !self.contains(x) {
            return None;
        }
        let s = (x - self.x_min) / self.dx();
        let i = (s.floor() as usize).min(self.n_points - 2);
        Some((i, s - i as f64))
    }

    /// Trapezoid weight of point `i`.
    #[inline]
    pub fn weight(&self, i: usize) -> f64 {
        if i == 0 || i + 1 == self.n_points {
            0.5 * self.dx()
        } else {
            self.dx()
        }
    }

    /// Trapezoid rule over grid samples.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.n_points);
        let n = values.len();
        let inner: f64 = values[1..n - 1].iter().sum();
        (inner + 0.5 * (values[0] + values[n - 1])) * self.dx()
    }

    fn same_as(&self, other: &Grid1D) -> bool {
        self.n_points == other.n_points
            && (self.x_min - other.x_min).abs() <= 1e-12 * (1.0 + self.x_min.abs())
            && (self.x_max - other.x_max).abs() <= 1e-12 * (1.0 + self.x_max.abs())
    }

    pub fn ensure_same(&self, other: &Grid1D) -> Result<()> {
        if self.same_as(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }
}

/// Linear interpolation of complex samples at `x`; zero outside the grid.
#[inline]
pub fn interpolate_complex(grid: &Grid1D, values: &[Complex64], x: f64) -> Complex64 {
    match grid.locate(x) {
        Some((i, t)) => values[i] * (1.0 - t) + values[i + 1] * t,
        None => Complex64::new(0.0, 0.0),
    }
}

/// Linear interpolation of real samples at `x`; zero outside the grid.
#[inline]
pub fn interpolate_real(grid: &Grid1D, values: &[f64], x: f64) -> f64 {
    match grid.locate(x) {
        Some((i, t)) => values[i] * (1.0 - t) + values[i + 1] * t,
        None => 0.0,
    }
}

/// A complex field on a 1D grid.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveFn1D {
    pub grid: Grid1D,
    pub values: Vec<Complex64>,
}

impl WaveFn1D {
    pub fn new(grid: Grid1D, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch(format!(
                "{} values for {} grid points",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: Grid1D, f: impl FnMut(f64) -> Complex64) -> Self {
        let values = grid.points().map(f).collect();
        Self { grid, values }
    }

    pub fn from_real(grid: Grid1D, f: impl Fn(f64) -> f64) -> Self {
        Self::from_fn(grid, |x| Complex64::new(f(x), 0.0))
    }

    pub fn norm_sqr(&self) -> f64 {
        let d: Vec<f64> = self.values.iter().map(|v| v.norm_sqr()).collect();
        self.grid.integrate(&d)
    }

    pub fn normalize(&mut self) -> Result<()> {
        let n2 = self.norm_sqr();
        if !(n2 > NORM_FLOOR) || !n2.is_finite() {
            return Err(Error::ZeroNorm(n2));
        }
        let s = 1.0 / n2.sqrt();
        self.values.iter_mut().for_each(|v| *v *= s);
        Ok(())
    }

    pub fn normalized(mut self) -> Result<Self> {
        self.normalize()?;
        Ok(self)
    }

    #[inline]
    pub fn at(&self, x: f64) -> Complex64 {
        interpolate_complex(&self.grid, &self.values, x)
    }

    /// Trapezoid inner product ⟨self|other⟩.
    pub fn inner(&self, other: &WaveFn1D) -> Result<Complex64> {
        self.grid.ensure_same(&other.grid)?;
        let n = self.values.len();
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..n {
            acc += self.values[i].conj() * other.values[i] * self.grid.weight(i);
        }
        Ok(acc)
    }

    pub fn probability_density(&self) -> Density1D {
        Density1D {
            grid: self.grid,
            values: self.values.iter().map(|v| v.norm_sqr()).collect(),
        }
    }
}

/// A complex field on a tensor grid `grid1 × grid2`, stored row-major
/// with the `x2` index fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveFn2D {
    pub grid1: Grid1D,
    pub grid2: Grid1D,
    pub values: Vec<Complex64>,
}

impl WaveFn2D {
    pub fn new(grid1: Grid1D, grid2: Grid1D, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid1.len() * grid2.len() {
            return Err(Error::LengthMismatch(format!(
                "{} values for a {}x{} grid",
                values.len(),
                grid1.len(),
                grid2.len()
            )));
        }
        Ok(Self { grid1, grid2, values })
    }

    pub fn from_fn(grid1: Grid1D, grid2: Grid1D, f: impl Fn(f64, f64) -> Complex64) -> Self {
        let mut values = Vec::with_capacity(grid1.len() * grid2.len());
        for x1 in grid1.points() {
            for x2 in grid2.points() {
                values.push(f(x1, x2));
            }
        }
        Self { grid1, grid2, values }
    }

    #[inline]
    pub fn index(&self, i1: usize, i2: usize) -> usize {
        i1 * self.grid2.len() + i2
    }

    pub fn norm_sqr(&self) -> f64 {
        let n2 = self.grid2.len();
        let mut total = 0.0;
        for i1 in 0..self.grid1.len() {
            let row = &self.values[i1 * n2..(i1 + 1) * n2];
            let mut s = 0.0;
            for (i2, v) in row.iter().enumerate() {
                s += v.norm_sqr() * self.grid2.weight(i2);
            }
            total += s * self.grid1.weight(i1);
        }
        total
    }

    pub fn normalize(&mut self) -> Result<()> {
        let n2 = self.norm_sqr();
        if !(n2 > NORM_FLOOR) || !n2.is_finite() {
            return Err(Error::ZeroNorm(n2));
        }
        let s = 1.0 / n2.sqrt();
        self.values.iter_mut().for_each(|v| *v *= s);
        Ok(())
    }

    /// Bilinear interpolation at `(x1, x2)`; zero outside the grid.
    pub fn at(&self, x1: f64, x2: f64) -> Complex64 {
        match (self.grid1.locate(x1), self.grid2.locate(x2)) {
            (Some((i, s)), Some((j, t))) => {
                let v00 = self.values[self.index(i, j)];
                let v01 = self.values[self.index(i, j + 1)];
                let v10 = self.values[self.index(i + 1, j)];
                let v11 = self.values[self.index(i + 1, j + 1)];
                v00 * ((1.0 - s) * (1.0 - t))
                    + v01 * ((1.0 - s) * t)
                    + v10 * (s * (1.0 - t))
                    + v11 * (s * t)
            }
            _ => Complex64::new(0.0, 0.0),
        }
    }

    /// Marginal density of the first coordinate, ∫|Ψ(x, x2)|² dx2.
    pub fn marginal1(&self) -> Density1D {
        let n2 = self.grid2.len();
        let values = (0..self.grid1.len())
            .map(|i1| {
                self.values[i1 * n2..(i1 + 1) * n2]
                    .iter()
                    .enumerate()
                    .map(|(i2, v)| v.norm_sqr() * self.grid2.weight(i2))
                    .sum()
            })
            .collect();
        Density1D { grid: self.grid1, values }
    }

    /// Largest |Ψ(x1,x2) − Ψ(x2,x1)|; requires identical grids.
    pub fn exchange_asymmetry(&self) -> Result<f64> {
        self.grid1.ensure_same(&self.grid2)?;
        let n = self.grid1.len();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                let d = (self.values[i * n + j] - self.values[j * n + i]).norm();
                worst = worst.max(d);
            }
        }
        Ok(worst)
    }
}

/// Nonnegative density sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Density1D {
    pub grid: Grid1D,
    pub values: Vec<f64>,
}

impl Density1D {
    pub fn integral(&self) -> f64 {
        self.grid.integrate(&self.values)
    }

    pub fn mean_and_std(&self) -> (f64, f64) {
        let mass = self.integral();
        let xs: Vec<f64> = self.grid.points().collect();
        let m1: Vec<f64> = xs.iter().zip(&self.values).map(|(x, p)| x * p).collect();
        let mean = self.grid.integrate(&m1) / mass;
        let m2: Vec<f64> = xs
            .iter()
            .zip(&self.values)
            .map(|(x, p)| (x - mean).powi(2) * p)
            .collect();
        (mean, (self.grid.integrate(&m2) / mass).sqrt())
    }
}

/// Normalizes a 1D wavefunction, returning a new one.
pub fn normalize(w: &WaveFn1D) -> Result<WaveFn1D> {
    w.clone().normalized()
}

/// Normalizes a 2D wavefunction, returning a new one.
pub fn normalize_2d(w: &WaveFn2D) -> Result<WaveFn2D> {
    let mut out = w.clone();
    out.normalize()?;
    Ok(out)
}

pub fn probability_density(w: &WaveFn1D) -> Density1D {
    w.probability_density()
}

/// Rule-of-thumb bandwidth `1.06 · std · M^(-1/5)`. `None` for fewer than
/// two points or a zero-spread sample.
pub fn silverman_bandwidth(points: &[f64]) -> Option<f64> {
    let m = points.len();
    if m < 2 {
        return None;
    }
    let std = sample_std(points);
    (std > 0.0).then(|| 1.06 * std * (m as f64).powf(-0.2))
}

/// Sample standard deviation with the `M − 1` denominator.
pub fn sample_std(points: &[f64]) -> f64 {
    let m = points.len() as f64;
    let mean = points.iter().sum::<f64>() / m;
    let ss: f64 = points.iter().map(|x| (x - mean).powi(2)).sum();
    (ss / (m - 1.0)).sqrt()
}

/// Gaussian kernel density estimate on `grid`.
///
/// Each kernel is truncated to the grid and renormalized there, so the result
/// always integrates to one under the trapezoid rule.
pub fn kde_estimate(points: &[f64], bandwidth: f64, grid: &Grid1D) -> Result<Density1D> {
    let share = 1.0 / points.len().max(1) as f64;
    let weights = vec![share; points.len()];
    kde_estimate_weighted(points, &weights, bandwidth, grid)
}

/// Weighted variant of [`kde_estimate`]; point `p` carries mass `weights[p]`.
/// Smoothing a grid density with its own nodes as points gives the density
/// convolved with the same kernel.
pub fn kde_estimate_weighted(points: &[f64], weights: &[f64], bandwidth: f64, grid: &Grid1D) -> Result<Density1D> {
    if points.is_empty() {
        return Err(Error::EmptySample);
    }
    if weights.len() != points.len() {
        return Err(Error::LengthMismatch(format!("{} weights for {} points", weights.len(), points.len())));
    }
    if !(bandwidth > 0.0) || !bandwidth.is_finite() {
        return Err(Error::NonPositiveBandwidth(bandwidth));
    }
    let n = grid.len();
    let dx = grid.dx();
    let reach = 9.0 * bandwidth;
    let inv2h2 = 0.5 / (bandwidth * bandwidth);
    let mut values = vec![0.0; n];
    let mut bump = vec![0.0; n];
    for (&p, &share) in points.iter().zip(weights) {
        if p + reach < grid.x_min() || p - reach > grid.x_max() || share == 0.0 {
            continue;
        }
        let lo = (((p - reach - grid.x_min()) / dx).floor().max(0.0) as usize).min(n - 1);
        let hi = (((p + reach - grid.x_min()) / dx).ceil().max(0.0) as usize).min(n - 1);
        let mut mass = 0.0;
        for (i, b) in bump.iter_mut().enumerate().take(hi + 1).skip(lo) {
            let d = grid.x(i) - p;
            let k = (-d * d * inv2h2).exp();
            *b = k;
            mass += k * grid.weight(i);
        }
        if mass > 0.0 {
            let s = share / mass;
            for i in lo..=hi {
                values[i] += bump[i] * s;
            }
        }
    }
    Ok(Density1D { grid: *grid, values })
}

/// Density convolved with a Gaussian of width `bandwidth` (per-node kernels
/// truncated to the grid, as in [`kde_estimate`]).
pub fn smooth_density(density: &Density1D, bandwidth: f64) -> Result<Density1D> {
    let g = density.grid;
    let points: Vec<f64> = g.points().collect();
    let weights: Vec<f64> = density.values.iter().enumerate().map(|(i, v)| v * g.weight(i)).collect();
    kde_estimate_weighted(&points, &weights, bandwidth, &g)
}

/// L1 distance ∫|p − q| dx.
pub fn l1_distance(p: &Density1D, q: &Density1D) -> Result<f64> {
    p.grid.ensure_same(&q.grid)?;
    let diff: Vec<f64> = p.values.iter().zip(&q.values).map(|(a, b)| (a - b).abs()).collect();
    Ok(p.grid.integrate(&diff))
}
