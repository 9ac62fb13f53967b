//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs the full desk-scale scenarios (M = 2000), which takes over an hour on
//! one core. `TDQMC_ACCEPTANCE_ONLY=ground,fig2,...` restricts the run to the
//! named sections. Artifacts land in `$CARGO_TARGET_TMPDIR/acceptance`.
//! Criteria that are not met are reported as FAIL without failing the
//! binary; only a crashed pipeline does.

use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;
use tdqmc::exact::{exact_ground_state, reduced_density_matrix, ExactPropagator, GroundStateOptions};
use tdqmc::hartree::hartree_scf;
use tdqmc::observables::ensemble_density_matrix;
use tdqmc::onebody::soft_core_ground_state;
use tdqmc::par::{set_execution, Execution};
use tdqmc::potentials::v_ee;
use tdqmc::propagation::{real_time_step, EnsembleState, RealTimeOptions, ScanRow};
use tdqmc::scenario::{run_scenario, Mode, RunConfig, RunSummary};
use tdqmc::walkers::{effective_potentials_all, KernelConfig, WalkerCloud};
use tdqmc::{Grid1D, LaserPulse, SoftCoreParams, WaveFn1D};

/// Exact ground-state energy on the preparation grid ([-30, 30], dx = 0.15).
const E_HE_EXACT: f64 = -2.238_915_682_607_666;

const WALKERS: usize = 2000;
const ALPHA_GRID: [f64; 5] = [0.0, 0.5, 1.0, 2.0, 1e4];
const SECTIONS: [&str; 7] = ["ground", "noninteracting", "limits", "fig2", "fig3", "properties", "convergence"];

struct Report {
    passed: usize,
    failed: usize,
}

impl Report {
    fn line(&mut self, name: &str, ok: bool, detail: String) {
        if ok {
            self.passed += 1;
        } else {
            self.failed += 1;
        }
        println!("{} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
    }
}

struct Ctx {
    root: PathBuf,
    only: Option<HashSet<String>>,
    best_alpha: Option<f64>,
    fig3: Option<RunSummary>,
}

impl Ctx {
    fn wants(&self, section: &str) -> bool {
        self.only.as_ref().is_none_or(|s| s.contains(section))
    }

    fn config(&self, mode: Mode, name: &str) -> RunConfig {
        RunConfig { mode, walkers: WALKERS, output_dir: self.root.join(name), ..RunConfig::default() }
    }

    fn alpha(&self) -> f64 {
        self.best_alpha.unwrap_or(1e4)
    }
}

fn run(cfg: &RunConfig) -> (RunSummary, f64) {
    let start = Instant::now();
    let summary = run_scenario(cfg).unwrap_or_else(|e| panic!("{} failed: {e}", cfg.output_dir.display()));
    (summary, start.elapsed().as_secs_f64())
}

fn metric(s: &RunSummary, name: &str) -> f64 {
    s.metric(name).unwrap_or_else(|| panic!("summary lacks {name}"))
}

fn scan_rows(dir: &Path) -> Vec<ScanRow> {
    csv::Reader::from_path(dir.join("alpha_scan.csv"))
        .unwrap()
        .deserialize()
        .collect::<Result<_, _>>()
        .unwrap()
}

fn fig3_pulse() -> LaserPulse {
    LaserPulse::new(0.16, 0.1, 2.0).unwrap()
}

fn ground(ctx: &mut Ctx, r: &mut Report) -> Vec<ScanRow> {
    let mut cfg = ctx.config(Mode::ScanAlpha, "scan_alpha");
    cfg.alpha_grid = ALPHA_GRID.to_vec();
    let (s, secs) = run(&cfg);
    let (best, rel, exact) = (metric(&s, "best_alpha"), metric(&s, "relative_error"), metric(&s, "exact_energy"));
    ctx.best_alpha = Some(best);
    r.line(
        "exact oracle regression",
        (exact - E_HE_EXACT).abs() < 1e-6,
        format!("E_exact = {exact:.9}, pinned {E_HE_EXACT:.9}"),
    );
    r.line(
        "ground-state energy at alpha*",
        rel < 0.01,
        format!(
            "alpha* = {best}, E0 = {:.5}, exact {exact:.5}, relative error {:.3}% (< 1%), scan {:.0} s",
            metric(&s, "best_energy"),
            100.0 * rel,
            secs
        ),
    );
    scan_rows(&cfg.output_dir)
}

fn noninteracting(ctx: &Ctx, r: &mut Report) {
    let mut cfg = ctx.config(Mode::ScanAlpha, "scan_alpha_b0");
    cfg.model = SoftCoreParams { a: 2.0, b: 0.0 };
    cfg.alpha_grid = vec![0.0, 1.0, 1e4];
    run(&cfg);
    let rows = scan_rows(&cfg.output_dir);
    let grid = cfg.grid.prepare.grid().unwrap();
    let (_, e1) = soft_core_ground_state(&grid, &cfg.model).unwrap();
    let target = 2.0 * e1;
    let worst = rows.iter().map(|row| ((row.energy - target) / target).abs()).fold(0.0, f64::max);
    r.line(
        "noninteracting energy",
        worst < 0.005,
        format!("2 E1 = {target:.5}, worst relative error over alpha {:.3}% (< 0.5%)", 100.0 * worst),
    );
    let hi = rows.iter().map(|row| row.energy).fold(f64::NEG_INFINITY, f64::max);
    let lo = rows.iter().map(|row| row.energy).fold(f64::INFINITY, f64::min);
    let err = rows.iter().map(|row| row.energy_error).fold(0.0, f64::max);
    r.line(
        "noninteracting alpha independence",
        hi - lo < 3.0 * err,
        format!("spread {:.2e} vs 3 x stat error {:.2e}", hi - lo, 3.0 * err),
    );
}

fn limits(ctx: &Ctx, r: &mut Report, rows: &[ScanRow]) {
    let params = SoftCoreParams::HELIUM;
    let grid = ctx.config(Mode::Prepare, "").grid.prepare.grid().unwrap();
    let at = |alpha: f64| rows.iter().find(|row| row.alpha == alpha).copied();

    if let Some(wide) = at(1e4) {
        let h = hartree_scf(&grid, &params, 1e-10, 1000).unwrap();
        let diff = (wide.ee_energy - h.ee_energy).abs();
        r.line(
            "wide-window limit matches Hartree",
            diff < 2.0 * wide.ee_error,
            format!(
                "<v_ee>(alpha=1e4) = {:.4} +- {:.4}, Hartree {:.4}, |diff| {diff:.4}",
                wide.ee_energy, wide.ee_error, h.ee_energy
            ),
        );
    }

    // α = 0 must give Σ_j v_ee(x - x_j^k) on the grid, on every route.
    let cloud0 = WalkerCloud::new(0, vec![-1.3, 0.2, 0.9, 2.4]).unwrap();
    let cloud1 = WalkerCloud::new(1, vec![0.7, -0.4, 1.6, -2.2]).unwrap();
    let clouds = vec![cloud0, cloud1];
    let kernel = KernelConfig::new(vec![0.0, 0.0], 1e-3).unwrap();
    let veff = effective_potentials_all(&grid, &clouds, &kernel, &params).unwrap();
    let mut worst: f64 = 0.0;
    for (i, per_electron) in veff.iter().enumerate() {
        for (k, v) in per_electron.iter().enumerate() {
            let partner = clouds[1 - i].positions[k];
            for (x, val) in grid.points().zip(v) {
                worst = worst.max((val - v_ee(x - partner, &params)).abs());
            }
        }
    }
    r.line("narrow-window limit is pairwise", worst < 1e-12, format!("max pointwise error {worst:.1e}"));

    if let (Some(narrow), Some(wide)) = (at(0.0), at(1e4)) {
        let best = ctx.alpha();
        let mid = at(best).unwrap_or(wide);
        let ok = narrow.ee_energy >= mid.ee_energy && mid.ee_energy >= wide.ee_energy;
        r.line(
            "e-e repulsion ordering",
            ok,
            format!(
                "<v_ee>: alpha=0 {:.4}, alpha*={best} {:.4}, alpha=1e4 {:.4} (need decreasing)",
                narrow.ee_energy, mid.ee_energy, wide.ee_energy
            ),
        );
    }
}

fn fig2(ctx: &Ctx, r: &mut Report) {
    let mut cfg = ctx.config(Mode::CompareFig2, "fig2");
    cfg.alpha = vec![ctx.alpha(); 2];
    let (s, secs) = run(&cfg);
    let l1 = metric(&s, "final_l1");
    r.line(
        "fig2 final density L1",
        l1 < 0.08,
        format!(
            "L1 = {l1:.4} (< 0.08; ensemble density {:.4}), {secs:.0} s",
            metric(&s, "final_l1_ensemble")
        ),
    );
    let (rms, threshold) = (metric(&s, "mean_rms_deviation"), metric(&s, "rms_threshold"));
    r.line(
        "fig2 trajectories diverge",
        rms > threshold,
        format!("mean RMS deviation {rms:.3} (> {threshold:.2} = 10 dx)"),
    );
}

fn fig3_config(ctx: &Ctx, name: &str) -> RunConfig {
    let mut cfg = ctx.config(Mode::CompareFig3, name);
    cfg.alpha = vec![ctx.alpha(); 2];
    cfg.pulse = Some(fig3_pulse());
    cfg
}

fn fig3(ctx: &mut Ctx, r: &mut Report) {
    let (s, secs) = run(&fig3_config(ctx, "fig3"));
    let ds = metric(&s, "max_survival_deviation");
    let dc = metric(&s, "max_coherence_deviation");
    r.line("fig3 survival agreement", ds < 0.1, format!("max |dS| = {ds:.4} (< 0.1), {secs:.0} s"));
    r.line("fig3 coherence agreement", dc < 0.1, format!("max |dC| = {dc:.4} (< 0.1)"));
    let (ns, nc) = (metric(&s, "survival_steps_tdqmc"), metric(&s, "coherence_steps_tdqmc"));
    r.line(
        "fig3 half-cycle steps",
        ns >= 2.0 && nc >= 2.0,
        format!("TDQMC steps: survival {ns}, coherence {nc}; exact survival {}", metric(&s, "survival_steps_exact")),
    );
    ctx.fig3 = Some(s);
}

fn packet(grid: Grid1D, c: f64, sigma: f64, k: f64) -> WaveFn1D {
    WaveFn1D::from_fn(grid, |x| Complex64::from_polar((-(x - c).powi(2) / (4.0 * sigma * sigma)).exp(), k * x))
        .normalized()
        .unwrap()
}

fn properties(ctx: &Ctx, r: &mut Report) {
    let params = SoftCoreParams::HELIUM;
    let pulse = fig3_pulse();

    // Norm of every guide wave under the pulse, per step.
    let grid = Grid1D::symmetric(25.0, 0.1).unwrap();
    let m = 30;
    let mut waves = Vec::new();
    let mut clouds = Vec::new();
    for i in 0..2 {
        let pos: Vec<f64> = (0..m).map(|k| -1.5 + 0.1 * k as f64 + 0.2 * i as f64).collect();
        waves.extend(pos.iter().map(|&c| packet(grid, c, 1.0, 0.3)));
        clouds.push(WalkerCloud::new(i, pos).unwrap());
    }
    let kernel = KernelConfig::new(vec![1.0, 1.0], 1e-3).unwrap();
    let mut state = EnsembleState::new(grid, waves, clouds, kernel).unwrap();
    state.refresh_sigma().unwrap();
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let before: Vec<f64> = state.waves.iter().map(|w| w.norm_sqr()).collect();
        real_time_step(&mut state, Some(&pulse), &params, &RealTimeOptions::new(0.05)).unwrap();
        for (w, b) in state.waves.iter().zip(&before) {
            worst = worst.max((w.norm_sqr() - b).abs());
        }
    }
    r.line("norm conservation", worst < 1e-8, format!("max per-step change {worst:.1e} (< 1e-8)"));

    // Density-matrix invariants for the ensemble and the exact state.
    let rho_e = ensemble_density_matrix(&state.waves[..m]).unwrap();
    let small = Grid1D::symmetric(12.0, 0.2).unwrap();
    let (ground, _) = exact_ground_state(&params, &small, &GroundStateOptions::default()).unwrap();
    let rho_x = reduced_density_matrix(&ground);
    let herm = rho_e.hermiticity_error().max(rho_x.hermiticity_error());
    let trace_err = (rho_e.trace() - 1.0).abs().max((rho_x.trace() - 1.0).abs());
    let (pe, px) = (rho_e.purity(), rho_x.purity());
    r.line(
        "density-matrix invariants",
        herm < 1e-12 && trace_err < 1e-8 && (0.0..=1.0 + 1e-9).contains(&pe) && px > 0.0 && px < 1.0,
        format!("hermiticity {herm:.1e}, trace error {trace_err:.1e}, purity ensemble {pe:.4} exact {px:.4}"),
    );

    // Free dispersion of a single guide wave: σ(2σ0²) = √2 σ0.
    let free = SoftCoreParams { a: 0.0, b: 0.0 };
    let g = Grid1D::symmetric(30.0, 0.05).unwrap();
    let cloud = WalkerCloud::new(0, vec![0.0, 1.0]).unwrap();
    let mut st = EnsembleState::new(
        g,
        vec![packet(g, 0.0, 1.0, 0.0); 2],
        vec![cloud],
        KernelConfig::new(vec![1.0], 1e-3).unwrap(),
    )
    .unwrap();
    for _ in 0..400 {
        real_time_step(&mut st, None, &free, &RealTimeOptions::new(0.005)).unwrap();
    }
    let width = st.waves[0].probability_density().mean_and_std().1;
    let err = (width - 2f64.sqrt()).abs();
    r.line("free-packet dispersion", err < 1e-3, format!("width {width:.6} vs sqrt 2, error {err:.1e}"));

    // Eigenstate stationarity of the noninteracting ensemble.
    let bare = SoftCoreParams { a: 2.0, b: 0.0 };
    let g = Grid1D::symmetric(20.0, 0.1).unwrap();
    let (phi, _) = soft_core_ground_state(&g, &bare).unwrap();
    let clouds = (0..2).map(|i| WalkerCloud::new(i, vec![-0.5, 0.1, 0.6]).unwrap()).collect();
    let mut st =
        EnsembleState::new(g, vec![phi; 6], clouds, KernelConfig::new(vec![1.0, 1.0], 1e-3).unwrap()).unwrap();
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let before: Vec<Vec<f64>> = st.waves.iter().map(|w| w.probability_density().values).collect();
        real_time_step(&mut st, None, &bare, &RealTimeOptions::new(0.02)).unwrap();
        for (w, b) in st.waves.iter().zip(&before) {
            let d = w.probability_density().values.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            worst = worst.max(d);
        }
    }
    let (mut exact_state, _) = exact_ground_state(
        &params,
        &small,
        &GroundStateOptions { dtau: 0.005, tol: 1e-15, max_steps: 50_000 },
    )
    .unwrap();
    let rho0 = exact_state.psi.marginal1();
    let mut prop = ExactPropagator::new(small, params);
    for _ in 0..100 {
        prop.step(&mut exact_state, None, 0.01).unwrap();
    }
    let drift = exact_state
        .psi
        .marginal1()
        .values
        .iter()
        .zip(&rho0.values)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    r.line(
        "eigenstate stationarity",
        worst < 1e-6 && drift < 1e-6,
        format!("TDQMC max density change per step {worst:.1e}; exact drift over 1 a.u. {drift:.1e}"),
    );

    // Seed-fixed reruns, with and without the thread pool.
    let mut cfg = ctx.config(Mode::Evolve, "rerun_a");
    cfg.walkers = 100;
    cfg.field = true;
    cfg.pulse = Some(pulse);
    cfg.steps.t_total = Some(2.0);
    cfg.steps.tau_total = 4.0;
    cfg.prep.tol_energy = 1.0;
    let files = |dir: &Path| {
        let mut v: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
            .unwrap()
            .map(|e| e.unwrap().path())
            .filter(|p| p.extension().is_some_and(|x| x == "csv"))
            .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
            .collect();
        v.sort();
        v
    };
    run(&cfg);
    let a = files(&cfg.output_dir);
    cfg.output_dir = ctx.root.join("rerun_b");
    run(&cfg);
    let b = files(&cfg.output_dir);
    set_execution(Execution::Sequential);
    cfg.output_dir = ctx.root.join("rerun_seq");
    run(&cfg);
    set_execution(Execution::Parallel);
    let c = files(&cfg.output_dir);
    r.line(
        "byte-identical reruns",
        !a.is_empty() && a == b && a == c,
        format!("{} CSV files compared across rerun and sequential execution", a.len()),
    );
}

fn convergence(ctx: &mut Ctx, r: &mut Report) {
    if ctx.fig3.is_none() {
        let (s, _) = run(&fig3_config(ctx, "fig3"));
        ctx.fig3 = Some(s);
    }
    let base = ctx.fig3.clone().unwrap();
    let keys = ["max_survival_deviation", "max_coherence_deviation", "final_survival_tdqmc", "final_coherence_tdqmc"];
    let compare = |other: &RunSummary| {
        keys.iter().map(|k| (metric(&base, k) - metric(other, k)).abs()).fold(0.0, f64::max)
    };

    let mut half_dt = fig3_config(ctx, "fig3_half_dt");
    half_dt.steps.dt_real *= 0.5;
    let (s, secs) = run(&half_dt);
    let d = compare(&s);
    r.line("convergence in dt", d < 0.05, format!("max metric change {d:.4} (< 0.05), {secs:.0} s"));

    let mut double_m = fig3_config(ctx, "fig3_double_m");
    double_m.walkers *= 2;
    let (s, secs) = run(&double_m);
    let d = compare(&s);
    r.line("convergence in M", d < 0.05, format!("max metric change {d:.4} (< 0.05), {secs:.0} s"));
}

fn main() {
    // Ignore libtest arguments such as `--nocapture` or filters.
    let only = std::env::var("TDQMC_ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').map(|p| p.trim().to_string()).filter(|p| !p.is_empty()).collect::<HashSet<_>>());
    if let Some(set) = &only {
        for s in set {
            assert!(SECTIONS.contains(&s.as_str()), "unknown section {s}; known: {SECTIONS:?}");
        }
    }
    let root = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    let mut ctx = Ctx { root, only, best_alpha: None, fig3: None };
    let mut r = Report { passed: 0, failed: 0 };
    let start = Instant::now();

    let needs_scan = ["ground", "limits", "fig2", "fig3", "convergence"].iter().any(|s| ctx.wants(s));
    let rows = if needs_scan { ground(&mut ctx, &mut r) } else { Vec::new() };
    if ctx.wants("noninteracting") {
        noninteracting(&ctx, &mut r);
    }
    if ctx.wants("limits") {
        limits(&ctx, &mut r, &rows);
    }
    if ctx.wants("fig2") {
        fig2(&ctx, &mut r);
    }
    if ctx.wants("fig3") {
        fig3(&mut ctx, &mut r);
    }
    if ctx.wants("properties") {
        properties(&ctx, &mut r);
    }
    if ctx.wants("convergence") {
        convergence(&mut ctx, &mut r);
    }
    println!(
        "acceptance: {} passed, {} failed in {:.0} s",
        r.passed,
        r.failed,
        start.elapsed().as_secs_f64()
    );
}
