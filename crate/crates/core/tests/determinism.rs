//! Reruns with one seed must reproduce every data file byte for byte, with
//! and without the thread pool.

use std::collections::BTreeMap;
use std::path::Path;

use tdqmc::par::{set_execution, Execution};
use tdqmc::scenario::{run_scenario, GridSpec, Mode, RunConfig};

fn small(mode: Mode, out: &Path) -> RunConfig {
    let mut cfg = RunConfig { mode, walkers: 40, output_dir: out.to_path_buf(), ..RunConfig::default() };
    cfg.grid.prepare = GridSpec { half_width: 12.0, dx: 0.3 };
    cfg.grid.dynamics = GridSpec { half_width: 12.0, dx: 0.3 };
    cfg.steps.tau_total = 2.0;
    cfg.steps.t_total = Some(0.5);
    cfg.prep.tol_energy = 10.0;
    cfg.prep.window = 10;
    cfg.field = false;
    cfg.snapshot_stride = 5;
    cfg
}

fn csv_files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect()
}

#[test]
fn reruns_and_execution_modes_are_bit_identical() {
    let root = tempfile::tempdir().unwrap();
    for mode in [Mode::Prepare, Mode::Evolve] {
        let run = |name: &str, exec: Execution| {
            set_execution(exec);
            let dir = root.path().join(format!("{}-{name}", mode.as_str()));
            let summary = run_scenario(&small(mode, &dir)).unwrap();
            (csv_files(&dir), summary.metrics)
        };
        let (a, ma) = run("a", Execution::Parallel);
        let (b, mb) = run("b", Execution::Parallel);
        let (c, mc) = run("seq", Execution::Sequential);
        set_execution(Execution::Parallel);
        assert!(!a.is_empty());
        assert_eq!(a, b, "{} rerun differs", mode.as_str());
        assert_eq!(a, c, "{} sequential differs", mode.as_str());
        assert_eq!(ma, mb);
        assert_eq!(ma, mc);
    }
}

#[test]
fn different_seeds_differ() {
    let root = tempfile::tempdir().unwrap();
    let mut cfg = small(Mode::Prepare, &root.path().join("s1"));
    let a = run_scenario(&cfg).unwrap();
    cfg.seed = 2;
    cfg.output_dir = root.path().join("s2");
    let b = run_scenario(&cfg).unwrap();
    assert_ne!(a.metric("energy"), b.metric("energy"));
}
