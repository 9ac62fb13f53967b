//! Command-line front end: `tdqmc <mode> [--config PATH] [--seed N] [--threads N] [--out DIR]`.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tdqmc::scenario::{parse_config, run_scenario, Mode, RunConfig};
use tdqmc::Error;

#[derive(Parser)]
#[command(name = "tdqmc", version, about = "Time-dependent quantum Monte Carlo for a 1D two-electron atom")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Prepare the correlated ground state and compare with the exact energy.
    Prepare(Flags),
    /// Prepare, then propagate the ensemble in real time.
    Evolve(Flags),
    /// Free expansion after switching off the nucleus, TDQMC vs exact trajectories.
    CompareFig2(Flags),
    /// Laser ionization: survival and coherence, TDQMC vs exact.
    CompareFig3(Flags),
    /// Ground-state energy over a grid of window multipliers.
    ScanAlpha(Flags),
}

#[derive(Args)]
struct Flags {
    /// JSON run configuration; defaults are used when omitted.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, value_name = "N")]
    threads: Option<usize>,
    /// Output directory (overrides the configured one).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

const EXIT_VALIDATION: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_IO: u8 = 1;

fn exit_code(e: &Error) -> u8 {
    match e {
        e if e.is_validation() => EXIT_VALIDATION,
        Error::Io(_) => EXIT_IO,
        _ => EXIT_NUMERICAL,
    }
}

fn build_config(mode: Mode, flags: &Flags) -> Result<RunConfig, Error> {
    let mut cfg = match &flags.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            parse_config(&text)?
        }
        None => RunConfig::default(),
    };
    cfg.mode = mode;
    if let Some(seed) = flags.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &flags.out {
        cfg.output_dir = out.clone();
    }
    if let Some(n) = flags.threads {
        if n == 0 {
            return Err(Error::Validation("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Validation(format!("cannot size the thread pool: {e}")))?;
        cfg.threads = Some(n);
    }
    cfg.resolved()
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let (mode, flags) = match &cli.command {
        Command::Prepare(f) => (Mode::Prepare, f),
        Command::Evolve(f) => (Mode::Evolve, f),
        Command::CompareFig2(f) => (Mode::CompareFig2, f),
        Command::CompareFig3(f) => (Mode::CompareFig3, f),
        Command::ScanAlpha(f) => (Mode::ScanAlpha, f),
    };
    let result = build_config(mode, flags).and_then(|cfg| run_scenario(&cfg));
    match result {
        Ok(summary) => {
            for (name, value) in &summary.metrics {
                println!("{name} = {value}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
