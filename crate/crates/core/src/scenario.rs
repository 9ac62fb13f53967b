//! Run configuration and the scenario pipelines behind the command line.
//!
//! A run reads a JSON [`RunConfig`], fills in defaults, writes the resolved
//! configuration next to its outputs and executes one of five modes. Data
//! files are CSV; `manifest.json` describes their columns, `summary.json`
//! carries the headline metrics.

use std::cell::Cell;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{advance_trajectories, exact_ground_state, reduced_density_matrix, ExactPropagator, GroundStateOptions};
use crate::grid::{kde_estimate, l1_distance, silverman_bandwidth, smooth_density, Density1D, Grid1D};
use crate::hartree::hartree_scf;
use crate::io;
use crate::observables::{
    coherence_raw, detect_steps, ensemble_density_matrix, survival_probability, trajectory_bundle_compare,
    CoherenceMode, DensityMatrix, Engine, ObservableSeries, TrajectoryBundle,
};
use crate::onebody::soft_core_ground_state;
use crate::par;
use crate::potentials::{LaserPulse, SoftCoreParams};
use crate::propagation::{
    alpha_scan, prepare_ground_state, real_time_step, AbsorbingMask, EnsembleState, PrepConfig, PrepResult,
    RealTimeOptions, TimeStepConfig,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    #[default]
    Prepare,
    Evolve,
    CompareFig2,
    CompareFig3,
    ScanAlpha,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Prepare => "prepare",
            Mode::Evolve => "evolve",
            Mode::CompareFig2 => "compare-fig2",
            Mode::CompareFig3 => "compare-fig3",
            Mode::ScanAlpha => "scan-alpha",
        }
    }
}

/// Symmetric grid `[-half_width, half_width]` with spacing `dx`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub half_width: f64,
    pub dx: f64,
}

impl GridSpec {
    pub fn grid(&self) -> Result<Grid1D> {
        Grid1D::symmetric(self.half_width, self.dx)
    }
}

/// 1D grids per stage; the exact solver runs on the square of the same grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpecs {
    /// Field-free runs: `prepare`, `scan-alpha`, `compare-fig2`.
    pub prepare: GridSpec,
    /// Laser runs: `compare-fig3` and `evolve` with a field.
    pub dynamics: GridSpec,
}

impl Default for GridSpecs {
    fn default() -> Self {
        Self {
            prepare: GridSpec { half_width: 30.0, dx: 0.15 },
            dynamics: GridSpec { half_width: 60.0, dx: 0.3 },
        }
    }
}

/// Time steps; unset entries get mode-dependent defaults on resolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StepsSpec {
    pub dt_real: f64,
    pub dtau_imag: f64,
    /// Defaults to the pulse end for laser runs and to 4 otherwise.
    pub t_total: Option<f64>,
    pub tau_total: f64,
    /// Defaults to `tau_total / 4`.
    pub anneal_tau: Option<f64>,
}

impl Default for StepsSpec {
    fn default() -> Self {
        Self { dt_real: 0.02, dtau_imag: 0.02, t_total: None, tau_total: 20.0, anneal_tau: None }
    }
}

/// Ground-state preparation controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PrepSpec {
    pub tol_energy: f64,
    pub window: usize,
    pub branching: bool,
    pub branch_until: f64,
    pub metropolis: bool,
    pub sigma_floor: f64,
}

impl Default for PrepSpec {
    fn default() -> Self {
        Self { tol_energy: 2e-3, window: 50, branching: true, branch_until: 0.5, metropolis: true, sigma_floor: 1e-3 }
    }
}

/// Measurement settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObservableSpec {
    /// Survival region `|x| < x_bound`.
    pub x_bound: f64,
    pub coherence_mode: CoherenceMode,
    /// Absorber width as a fraction of the half box, laser runs only.
    pub mask_fraction: f64,
    /// Trajectories compared in `compare-fig2`.
    pub n_trajectories: usize,
    /// Refresh the cloud spreads every this many real-time steps.
    pub sigma_stride: usize,
}

impl Default for ObservableSpec {
    fn default() -> Self {
        Self {
            x_bound: 8.0,
            coherence_mode: CoherenceMode::ModulusOfSum,
            mask_fraction: 0.15,
            n_trajectories: 50,
            sigma_stride: 1,
        }
    }
}

/// Complete description of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    pub model: SoftCoreParams,
    pub pulse: Option<LaserPulse>,
    pub grid: GridSpecs,
    pub steps: StepsSpec,
    /// Walkers per electron (`M`).
    pub walkers: usize,
    /// Window multiplier `α` per electron; 0 selects the pairwise limit.
    pub alpha: Vec<f64>,
    /// α values tried by `scan-alpha`.
    pub alpha_grid: Vec<f64>,
    pub seed: u64,
    /// Worker threads; recorded as used once resolved.
    pub threads: Option<usize>,
    pub output_dir: PathBuf,
    /// Observables are recorded every this many real-time steps.
    pub snapshot_stride: usize,
    /// `evolve` only: apply the pulse.
    pub field: bool,
    /// `evolve` only: switch off the nucleus after preparation.
    pub release_nucleus: bool,
    pub prep: PrepSpec,
    pub observables: ObservableSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Prepare,
            model: SoftCoreParams::HELIUM,
            pulse: None,
            grid: GridSpecs::default(),
            steps: StepsSpec::default(),
            walkers: 2000,
            alpha: vec![1.0, 1.0],
            alpha_grid: vec![0.0, 0.5, 1.0, 2.0, 1e4],
            seed: 1,
            threads: None,
            output_dir: PathBuf::from("out"),
            snapshot_stride: 25,
            field: true,
            release_nucleus: false,
            prep: PrepSpec::default(),
            observables: ObservableSpec::default(),
        }
    }
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::Validation(msg.into())
}

impl RunConfig {
    fn uses_field(&self) -> bool {
        match self.mode {
            Mode::CompareFig3 => true,
            Mode::Evolve => self.field,
            _ => false,
        }
    }

    /// Grid of the TDQMC run (and, squared, of the exact solver).
    pub fn run_grid(&self) -> Result<Grid1D> {
        if self.uses_field() { self.grid.dynamics.grid() } else { self.grid.prepare.grid() }
    }

    pub fn time_steps(&self) -> TimeStepConfig {
        TimeStepConfig {
            dt_real: self.steps.dt_real,
            dtau_imag: self.steps.dtau_imag,
            t_total: self.steps.t_total.unwrap_or(4.0),
            tau_total: self.steps.tau_total,
            anneal_tau: self.steps.anneal_tau,
        }
    }

    /// Fills mode-dependent defaults and checks every invariant.
    pub fn resolved(mut self) -> Result<Self> {
        if self.uses_field() {
            let pulse = self
                .pulse
                .ok_or_else(|| invalid(format!("mode {} with a field needs a pulse section", self.mode.as_str())))?;
            pulse.validate().map_err(|e| invalid(e.to_string()))?;
            if self.steps.t_total.is_none() {
                self.steps.t_total = Some(pulse.t_end());
            }
        }
        if self.steps.t_total.is_none() {
            self.steps.t_total = Some(4.0);
        }
        if self.steps.anneal_tau.is_none() {
            self.steps.anneal_tau = Some(self.steps.tau_total / 4.0);
        }
        if self.threads.is_none() {
            self.threads = Some(par::thread_count());
        }
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate().map_err(|e| invalid(e.to_string()))?;
        self.time_steps().validate().map_err(|e| invalid(e.to_string()))?;
        for (name, spec) in [("grid.prepare", self.grid.prepare), ("grid.dynamics", self.grid.dynamics)] {
            spec.grid().map_err(|e| invalid(format!("{name}: {e}")))?;
        }
        if self.walkers < 2 {
            return Err(invalid(format!("walkers must be at least 2, got {}", self.walkers)));
        }
        if self.alpha.len() != 2 || self.alpha.iter().any(|a| !(*a >= 0.0) || !a.is_finite()) {
            return Err(invalid("alpha must list two finite nonnegative values"));
        }
        if self.mode == Mode::ScanAlpha && (self.alpha_grid.is_empty() || self.alpha_grid.iter().any(|a| !(*a >= 0.0))) {
            return Err(invalid("alpha_grid must be nonempty and nonnegative"));
        }
        if self.snapshot_stride == 0 {
            return Err(invalid("snapshot_stride must be positive"));
        }
        if self.threads == Some(0) {
            return Err(invalid("threads must be positive"));
        }
        let p = &self.prep;
        if !(p.tol_energy > 0.0) || p.window == 0 || !(0.0..=1.0).contains(&p.branch_until) || !(p.sigma_floor >= 0.0) {
            return Err(invalid("prep needs tol_energy > 0, window > 0, branch_until in [0, 1], sigma_floor >= 0"));
        }
        let o = &self.observables;
        if !(0.0..0.5).contains(&o.mask_fraction) {
            return Err(invalid(format!("observables.mask_fraction must lie in [0, 0.5), got {}", o.mask_fraction)));
        }
        if self.mode == Mode::CompareFig2 && (o.n_trajectories == 0 || o.n_trajectories > self.walkers) {
            return Err(invalid("observables.n_trajectories must lie in 1..=walkers"));
        }
        let grid = self.run_grid()?;
        if !(o.x_bound > 0.0) || o.x_bound > grid.x_max() {
            return Err(invalid(format!("observables.x_bound {} lies outside the run grid", o.x_bound)));
        }
        Ok(())
    }

    fn prep_config(&self, grid: Grid1D, params: SoftCoreParams, alpha: Vec<f64>) -> PrepConfig {
        PrepConfig {
            grid,
            params,
            n_electrons: 2,
            n_walkers: self.walkers,
            alpha,
            sigma_floor: self.prep.sigma_floor,
            steps: self.time_steps(),
            seed: self.seed,
            tol_energy: self.prep.tol_energy,
            window: self.prep.window,
            branching: self.prep.branching,
            branch_until: self.prep.branch_until,
            metropolis: self.prep.metropolis,
        }
    }
}

/// Parses a JSON configuration without filling defaults that depend on the mode.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    serde_json::from_str(text).map_err(|e| Error::ConfigParse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

/// Reads, resolves and validates a configuration file.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_config(&text)?.resolved()
}

/// Headline results of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub mode: Mode,
    pub seed: u64,
    pub threads: usize,
    pub metrics: BTreeMap<String, f64>,
    pub wall_seconds: f64,
}

impl RunSummary {
    pub fn metric(&self, name: &str) -> Option<f64> {
        self.metrics.get(name).copied()
    }
}

/// Series collected during a run, flushed even when the run fails.
#[derive(Debug, Default)]
struct Recorder {
    files: BTreeMap<&'static str, Vec<ObservableSeries>>,
    metrics: BTreeMap<String, f64>,
}

impl Recorder {
    fn series(&mut self, file: &'static str, label: &str, engine: Engine) -> usize {
        let list = self.files.entry(file).or_default();
        list.push(ObservableSeries::new(label, engine));
        list.len() - 1
    }

    fn push(&mut self, file: &'static str, idx: usize, t: f64, v: f64) -> Result<()> {
        self.files.get_mut(file).expect("series registered")[idx].push(t, v)
    }

    fn get(&self, file: &'static str, idx: usize) -> &ObservableSeries {
        &self.files[file][idx]
    }

    fn metric(&mut self, name: &str, v: f64) {
        self.metrics.insert(name.to_string(), v);
    }

    fn flush(&self, dir: &Path) -> Result<()> {
        for (file, list) in &self.files {
            let refs: Vec<&ObservableSeries> = list.iter().collect();
            io::write_series(&dir.join(file), &refs)?;
        }
        Ok(())
    }
}

/// Executes the configured pipeline, writing every artifact to
/// `cfg.output_dir`. On failure the collected series are still written and a
/// `FAILED` marker holds the error.
pub fn run_scenario(cfg: &RunConfig) -> Result<RunSummary> {
    let cfg = cfg.clone().resolved()?;
    let out = cfg.output_dir.clone();
    std::fs::create_dir_all(&out).map_err(|e| Error::Io(format!("{}: {e}", out.display())))?;
    let marker = out.join("FAILED");
    if marker.exists() {
        std::fs::remove_file(&marker)?;
    }
    io::write_json(&out.join("resolved_config.json"), &cfg)?;
    let start = Instant::now();
    let mut rec = Recorder::default();
    let result = match cfg.mode {
        Mode::Prepare => run_prepare(&cfg, &out, &mut rec),
        Mode::ScanAlpha => run_scan(&cfg, &out, &mut rec),
        Mode::Evolve => run_evolve(&cfg, &out, &mut rec),
        Mode::CompareFig2 => run_fig2(&cfg, &out, &mut rec),
        Mode::CompareFig3 => run_fig3(&cfg, &out, &mut rec),
    };
    let flushed = rec.flush(&out);
    let threads = cfg.threads.unwrap_or(1);
    let manifest = io::write_manifest(&out, cfg.mode.as_str(), cfg.seed, threads);
    if let Err(e) = result.and(flushed).and(manifest) {
        std::fs::write(&marker, format!("{e}\n"))?;
        return Err(e);
    }
    let summary = RunSummary {
        mode: cfg.mode,
        seed: cfg.seed,
        threads,
        metrics: rec.metrics,
        wall_seconds: start.elapsed().as_secs_f64(),
    };
    io::write_json(&out.join("summary.json"), &summary)?;
    Ok(summary)
}

fn prepare(cfg: &RunConfig, grid: Grid1D, rec: &mut Recorder, out: &Path) -> Result<PrepResult> {
    let res = prepare_ground_state(&cfg.prep_config(grid, cfg.model, cfg.alpha.clone()))?;
    log::info!("prepared E0 = {:.6} ± {:.6} in {} steps", res.energy, res.energy_error, res.trace.len());
    io::write_energy_trace(&out.join("energy_trace.csv"), &res.trace)?;
    rec.metric("energy", res.energy);
    rec.metric("energy_error", res.energy_error);
    rec.metric("ee_energy", res.ee_energy);
    rec.metric("ee_error", res.ee_error);
    rec.metric("prep_steps", res.trace.len() as f64);
    Ok(res)
}

/// Mean `|φ|²` over all guide waves of electron `i`.
fn ensemble_density(state: &EnsembleState, i: usize) -> Density1D {
    let waves = state.waves_of(i);
    let mut values = vec![0.0; state.grid.len()];
    for w in waves {
        for (v, a) in values.iter_mut().zip(&w.values) {
            *v += a.norm_sqr();
        }
    }
    let share = 1.0 / waves.len() as f64;
    values.iter_mut().for_each(|v| *v *= share);
    Density1D { grid: state.grid, values }
}

fn pooled_positions(state: &EnsembleState) -> Vec<f64> {
    state.clouds.iter().flat_map(|c| c.positions.iter().copied()).collect()
}

fn walker_kde(state: &EnsembleState) -> Result<(Density1D, f64)> {
    let pos = pooled_positions(state);
    let h = silverman_bandwidth(&pos).ok_or(Error::EmptySample)?;
    Ok((kde_estimate(&pos, h, &state.grid)?, h))
}

fn exact_reference(cfg: &RunConfig, grid: &Grid1D, rec: &mut Recorder) -> Result<(crate::exact::TwoBodyState, f64)> {
    let (state, e) = exact_ground_state(&cfg.model, grid, &GroundStateOptions::default())?;
    log::info!("exact E0 = {e:.8}");
    rec.metric("exact_energy", e);
    Ok((state, e))
}

fn run_prepare(cfg: &RunConfig, out: &Path, rec: &mut Recorder) -> Result<()> {
    let grid = cfg.run_grid()?;
    let res = prepare(cfg, grid, rec, out)?;
    let (exact, e_exact) = exact_reference(cfg, &grid, rec)?;
    rec.metric("relative_error", ((res.energy - e_exact) / e_exact).abs());
    let (_, e1) = soft_core_ground_state(&grid, &SoftCoreParams { a: cfg.model.a, b: 0.0 })?;
    rec.metric("noninteracting_energy", 2.0 * e1);
    let h = hartree_scf(&grid, &cfg.model, 1e-10, 1000)?;
    rec.metric("hartree_energy", h.total_energy);
    rec.metric("hartree_ee_energy", h.ee_energy);

    let (kde, _) = walker_kde(&res.state)?;
    let ens = ensemble_density(&res.state, 0);
    let marginal = exact.psi.marginal1();
    rec.metric("density_l1", l1_distance(&ens, &marginal)?);
    io::write_walkers(&out.join("walkers.csv"), &res.state.clouds)?;
    io::write_densities(
        &out.join("densities.csv"),
        &[("tdqmc_kde", &kde), ("tdqmc_ensemble", &ens), ("exact", &marginal)],
    )
}

fn run_scan(cfg: &RunConfig, out: &Path, rec: &mut Recorder) -> Result<()> {
    let grid = cfg.run_grid()?;
    let scan = alpha_scan(&cfg.prep_config(grid, cfg.model, cfg.alpha.clone()), &cfg.alpha_grid)?;
    let mut w = csv::Writer::from_path(out.join("alpha_scan.csv"))?;
    for row in &scan.rows {
        w.serialize(row)?;
    }
    w.flush()?;
    let (_, e_exact) = exact_reference(cfg, &grid, rec)?;
    rec.metric("best_alpha", scan.best_alpha);
    rec.metric("best_energy", scan.best_energy);
    rec.metric("relative_error", ((scan.best_energy - e_exact) / e_exact).abs());
    Ok(())
}

/// `(ρ_1 + ρ_2)/2` from the two electrons' guide waves.
fn tdqmc_density_matrix(state: &EnsembleState) -> Result<DensityMatrix> {
    let mut rho = ensemble_density_matrix(state.waves_of(0))?;
    for i in 1..state.n_electrons() {
        let other = ensemble_density_matrix(state.waves_of(i))?;
        rho.values.iter_mut().zip(&other.values).for_each(|(a, b)| *a += b);
    }
    let share = 1.0 / state.n_electrons() as f64;
    rho.values.iter_mut().for_each(|v| *v *= share);
    Ok(rho)
}

/// Survival and coherence series plus the norm lost to the absorber. Both
/// headline series are divided by their first (t = 0) value.
struct Probe {
    engine: Engine,
    survival: usize,
    survival_raw: usize,
    coherence: usize,
    coherence_raw: usize,
    absorbed: usize,
    reference: Cell<Option<(f64, f64)>>,
}

impl Probe {
    fn new(rec: &mut Recorder, engine: Engine) -> Self {
        Self {
            engine,
            survival: rec.series("survival.csv", "survival", engine),
            survival_raw: rec.series("survival_raw.csv", "survival_raw", engine),
            coherence: rec.series("coherence.csv", "coherence", engine),
            coherence_raw: rec.series("coherence_raw.csv", "coherence_raw", engine),
            absorbed: rec.series("absorbed.csv", "absorbed", engine),
            reference: Cell::new(None),
        }
    }

    fn record(&self, rec: &mut Recorder, cfg: &RunConfig, t: f64, rho: &DensityMatrix, norm: f64) -> Result<()> {
        let c = coherence_raw(rho, cfg.observables.coherence_mode)?;
        let s = survival_probability(rho, cfg.observables.x_bound)?;
        let (s0, c0) = match self.reference.get() {
            Some(r) => r,
            None => {
                if !(s > 0.0 && c > 0.0) {
                    return Err(Error::InvalidParameter("initial survival and coherence must be positive".into()));
                }
                self.reference.set(Some((s, c)));
                (s, c)
            }
        };
        rec.push("survival.csv", self.survival, t, s / s0)?;
        rec.push("survival_raw.csv", self.survival_raw, t, s)?;
        rec.push("coherence.csv", self.coherence, t, c / c0)?;
        rec.push("coherence_raw.csv", self.coherence_raw, t, c)?;
        rec.push("absorbed.csv", self.absorbed, t, 1.0 - norm)?;
        log::debug!("{} t = {t:.3}: survival {s:.5}, coherence {c:.5}", self.engine.as_str());
        Ok(())
    }
}

fn mean_norm(state: &EnsembleState) -> f64 {
    state.waves.iter().map(|w| w.norm_sqr()).sum::<f64>() / state.waves.len() as f64
}

fn run_evolve(cfg: &RunConfig, out: &Path, rec: &mut Recorder) -> Result<()> {
    let grid = cfg.run_grid()?;
    let res = prepare(cfg, grid, rec, out)?;
    let mut state = res.state;
    let params = if cfg.release_nucleus { SoftCoreParams { a: 0.0, ..cfg.model } } else { cfg.model };
    let pulse = if cfg.field { cfg.pulse } else { None };
    let mut opts = RealTimeOptions::new(cfg.steps.dt_real);
    opts.sigma_stride = cfg.observables.sigma_stride;
    if pulse.is_some() {
        opts.mask = Some(AbsorbingMask::cos_eighth(&grid, cfg.observables.mask_fraction));
    }
    let probe = Probe::new(rec, Engine::Tdqmc);
    let n_steps = (cfg.time_steps().t_total / cfg.steps.dt_real).round() as usize;
    probe.record(rec, cfg, 0.0, &tdqmc_density_matrix(&state)?, mean_norm(&state))?;
    let mut node_events = 0;
    for n in 1..=n_steps {
        node_events += real_time_step(&mut state, pulse.as_ref(), &params, &opts)?.node_events;
        if n % cfg.snapshot_stride == 0 || n == n_steps {
            probe.record(rec, cfg, state.t, &tdqmc_density_matrix(&state)?, mean_norm(&state))?;
        }
    }
    rec.metric("node_events", node_events as f64);
    rec.metric("final_survival", *rec.get("survival.csv", probe.survival).values.last().unwrap());
    rec.metric("final_coherence", *rec.get("coherence.csv", probe.coherence).values.last().unwrap());
    let (kde, _) = walker_kde(&state)?;
    io::write_walkers(&out.join("walkers_final.csv"), &state.clouds)?;
    io::write_densities(&out.join("densities_final.csv"), &[("tdqmc_kde", &kde), ("tdqmc_ensemble", &ensemble_density(&state, 0))])
}

/// Replicas at evenly spaced quantiles of electron 0's initial positions.
pub fn stratified_selection(positions: &[f64], n: usize) -> Vec<usize> {
    let m = positions.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| positions[a].total_cmp(&positions[b]).then(a.cmp(&b)));
    (0..n.min(m)).map(|j| order[((j as f64 + 0.5) * m as f64 / n as f64) as usize]).collect()
}

fn run_fig2(cfg: &RunConfig, out: &Path, rec: &mut Recorder) -> Result<()> {
    let grid = cfg.run_grid()?;
    let res = prepare(cfg, grid, rec, out)?;
    let (exact, e_exact) = exact_reference(cfg, &grid, rec)?;
    rec.metric("relative_error", ((res.energy - e_exact) / e_exact).abs());
    let mut state = res.state;
    let mut exact = exact;
    let free = SoftCoreParams { a: 0.0, ..cfg.model };
    let dt = cfg.steps.dt_real;
    let n_steps = (cfg.time_steps().t_total / dt).round() as usize;
    let mut opts = RealTimeOptions::new(dt);
    opts.sigma_stride = cfg.observables.sigma_stride;
    let mut prop = ExactPropagator::new(grid, free);

    let chosen = stratified_selection(&state.clouds[0].positions, cfg.observables.n_trajectories);
    let mut exact_pos: Vec<(f64, f64)> =
        chosen.iter().map(|&k| (state.clouds[0].positions[k], state.clouds[1].positions[k])).collect();
    let (kde0, _) = walker_kde(&state)?;
    io::write_densities(&out.join("densities_initial.csv"), &[("tdqmc_kde", &kde0), ("exact", &exact.psi.marginal1())])?;

    let mut times = vec![0.0];
    let mut tdqmc_paths: Vec<Vec<f64>> = chosen.iter().map(|&k| vec![state.clouds[0].positions[k]]).collect();
    let mut exact_paths: Vec<Vec<f64>> = exact_pos.iter().map(|p| vec![p.0]).collect();
    let mut node_events = 0;
    for _ in 0..n_steps {
        node_events += real_time_step(&mut state, None, &free, &opts)?.node_events;
        let old = exact.psi.clone();
        prop.step(&mut exact, None, dt)?;
        node_events += advance_trajectories(&old, &exact.psi, &mut exact_pos, dt);
        times.push(state.t);
        for (j, &k) in chosen.iter().enumerate() {
            tdqmc_paths[j].push(state.clouds[0].positions[k]);
            exact_paths[j].push(exact_pos[j].0);
        }
    }
    rec.metric("node_events", node_events as f64);
    let tdqmc_bundle = TrajectoryBundle::new(times.clone(), tdqmc_paths)?;
    let exact_bundle = TrajectoryBundle::new(times.clone(), exact_paths)?;
    io::write_trajectories(&out.join("trajectories.csv"), &[("tdqmc", &tdqmc_bundle), ("exact", &exact_bundle)])?;

    let (kde, h) = walker_kde(&state)?;
    let marginal = exact.psi.marginal1();
    let smoothed = smooth_density(&marginal, h)?;
    let cmp = trajectory_bundle_compare(&tdqmc_bundle, &exact_bundle, &grid, h)?;
    let mut w = csv::Writer::from_path(out.join("trajectory_deviation.csv"))?;
    w.write_record(["t", "rms_deviation"])?;
    for (t, d) in times.iter().zip(&cmp.deviation_series) {
        w.serialize((t, d))?;
    }
    w.flush()?;
    let ens = ensemble_density(&state, 0);
    io::write_densities(
        &out.join("densities_final.csv"),
        &[("tdqmc_kde", &kde), ("tdqmc_ensemble", &ens), ("exact", &marginal), ("exact_smoothed", &smoothed)],
    )?;
    rec.metric("final_l1_ensemble", l1_distance(&ens, &marginal)?);
    rec.metric("final_l1_walkers_vs_ensemble", l1_distance(&kde, &smooth_density(&ens, h)?)?);
    rec.metric("final_l1", l1_distance(&kde, &smoothed)?);
    rec.metric("final_l1_unsmoothed", l1_distance(&kde, &marginal)?);
    rec.metric("kde_bandwidth", h);
    rec.metric("bundle_final_l1", cmp.final_l1);
    rec.metric("mean_rms_deviation", cmp.mean_rms);
    rec.metric("final_rms_deviation", *cmp.deviation_series.last().unwrap());
    rec.metric("rms_threshold", 10.0 * grid.dx());
    rec.metric("final_width_tdqmc", kde.mean_and_std().1);
    rec.metric("final_width_exact", marginal.mean_and_std().1);
    Ok(())
}

fn run_fig3(cfg: &RunConfig, out: &Path, rec: &mut Recorder) -> Result<()> {
    let grid = cfg.run_grid()?;
    let pulse = cfg.pulse.ok_or_else(|| invalid("compare-fig3 needs a pulse"))?;
    let res = prepare(cfg, grid, rec, out)?;
    let (exact, e_exact) = exact_reference(cfg, &grid, rec)?;
    rec.metric("relative_error", ((res.energy - e_exact) / e_exact).abs());
    let mut state = res.state;
    let mut exact = exact;
    let dt = cfg.steps.dt_real;
    let n_steps = (cfg.time_steps().t_total / dt).round() as usize;
    let mask = AbsorbingMask::cos_eighth(&grid, cfg.observables.mask_fraction);
    let mut opts = RealTimeOptions::new(dt);
    opts.sigma_stride = cfg.observables.sigma_stride;
    opts.mask = Some(mask.clone());
    let mut prop = ExactPropagator::new(grid, cfg.model).with_mask(mask);

    let tq = Probe::new(rec, Engine::Tdqmc);
    let ex = Probe::new(rec, Engine::Exact);
    let snapshot = |rec: &mut Recorder, state: &EnsembleState, exact: &crate::exact::TwoBodyState| -> Result<()> {
        tq.record(rec, cfg, state.t, &tdqmc_density_matrix(state)?, mean_norm(state))?;
        ex.record(rec, cfg, exact.t, &reduced_density_matrix(exact), exact.psi.norm_sqr())
    };
    snapshot(rec, &state, &exact)?;
    let mut node_events = 0;
    for n in 1..=n_steps {
        node_events += real_time_step(&mut state, Some(&pulse), &cfg.model, &opts)?.node_events;
        prop.step(&mut exact, Some(&pulse), dt)?;
        if n % cfg.snapshot_stride == 0 || n == n_steps {
            snapshot(rec, &state, &exact)?;
        }
        if n % 500 == 0 {
            log::info!("t = {:.2} / {:.2}", state.t, n_steps as f64 * dt);
        }
    }
    rec.metric("node_events", node_events as f64);

    let rho_exact = reduced_density_matrix(&exact);
    let rho_tdqmc = tdqmc_density_matrix(&state)?;
    rec.metric("exact_final_purity", rho_exact.purity() / rho_exact.trace().powi(2));
    rec.metric("tdqmc_final_purity", rho_tdqmc.purity() / rho_tdqmc.trace().powi(2));
    if rho_exact.values.len() <= io::MAX_MATRIX_ENTRIES {
        io::write_density_matrix(&out.join("rdm_exact_final.csv"), &rho_exact)?;
    }
    io::write_densities(
        &out.join("densities_final.csv"),
        &[("tdqmc_ensemble", &rho_tdqmc.diagonal()), ("exact", &rho_exact.diagonal())],
    )?;

    let series = |f: &'static str, idx: usize| rec.get(f, idx).clone();
    let (s_t, s_e) = (series("survival.csv", tq.survival), series("survival.csv", ex.survival));
    let (c_t, c_e) = (series("coherence.csv", tq.coherence), series("coherence.csv", ex.coherence));
    rec.metric("max_survival_deviation", s_t.max_abs_deviation(&s_e)?);
    rec.metric("max_coherence_deviation", c_t.max_abs_deviation(&c_e)?);
    rec.metric("final_survival_tdqmc", *s_t.values.last().unwrap());
    rec.metric("final_survival_exact", *s_e.values.last().unwrap());
    rec.metric("final_coherence_tdqmc", *c_t.values.last().unwrap());
    rec.metric("final_coherence_exact", *c_e.values.last().unwrap());
    let (smooth, sep) = step_detection_settings(&s_t, &pulse);
    rec.metric("survival_steps_tdqmc", detect_steps(&s_t, smooth, STEP_THRESHOLD, sep).len() as f64);
    rec.metric("survival_steps_exact", detect_steps(&s_e, smooth, STEP_THRESHOLD, sep).len() as f64);
    rec.metric("coherence_steps_tdqmc", detect_steps(&c_t, smooth, STEP_THRESHOLD, sep).len() as f64);
    Ok(())
}

/// Relative loss-rate threshold for counting a survival step.
pub const STEP_THRESHOLD: f64 = 0.15;

/// Smoothing window (samples) of about a twentieth of a period and the
/// minimum step separation of a quarter period.
pub fn step_detection_settings(series: &ObservableSeries, pulse: &LaserPulse) -> (usize, f64) {
    let period = 2.0 * std::f64::consts::PI / pulse.omega;
    let dt = if series.len() > 1 { series.times[1] - series.times[0] } else { period };
    (((period / 20.0) / dt).round().max(1.0) as usize, period / 4.0)
}
