//! CSV and JSON artifacts.
//!
//! Every data file is plain CSV with a header row. Binary wavefunction dumps
//! carry a JSON sidecar describing the layout.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact::TwoBodyState;
use crate::grid::{Density1D, Grid1D};
use crate::observables::{DensityMatrix, ObservableSeries, TrajectoryBundle};
use crate::propagation::TracePoint;
use crate::walkers::WalkerCloud;

/// Largest density matrix written as CSV.
pub const MAX_MATRIX_ENTRIES: usize = 512 * 512;

fn writer(path: &Path) -> Result<csv::Writer<File>> {
    Ok(csv::Writer::from_path(path)?)
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

/// Long-format series file: `t, value, engine`, series appended in order.
pub fn write_series(path: &Path, series: &[&ObservableSeries]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["t", "value", "engine"])?;
    for s in series {
        for (t, v) in s.times.iter().zip(&s.values) {
            w.serialize((t, v, s.engine.as_str()))?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Densities sharing one grid, one column each after `x`.
pub fn write_densities(path: &Path, columns: &[(&str, &Density1D)]) -> Result<()> {
    let grid = columns.first().map(|c| c.1.grid).ok_or(Error::EmptySample)?;
    for (_, d) in columns {
        grid.ensure_same(&d.grid)?;
    }
    let mut w = writer(path)?;
    let mut header = vec!["x"];
    header.extend(columns.iter().map(|c| c.0));
    w.write_record(&header)?;
    for (i, x) in grid.points().enumerate() {
        let mut row = vec![x];
        row.extend(columns.iter().map(|c| c.1.values[i]));
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// `x, x', re, im` for every matrix entry; refuses matrices above
/// [`MAX_MATRIX_ENTRIES`].
pub fn write_density_matrix(path: &Path, rho: &DensityMatrix) -> Result<()> {
    if rho.values.len() > MAX_MATRIX_ENTRIES {
        return Err(Error::InvalidParameter(format!(
            "density matrix with {} entries is too large for CSV",
            rho.values.len()
        )));
    }
    let mut w = writer(path)?;
    w.write_record(["x", "x_prime", "re", "im"])?;
    let g = rho.grid;
    for i in 0..g.len() {
        for j in 0..g.len() {
            let v = rho.at(i, j);
            w.serialize((g.x(i), g.x(j), v.re, v.im))?;
        }
    }
    w.flush()?;
    Ok(())
}

/// One row per replica: `k, x0, x1, ...`.
pub fn write_walkers(path: &Path, clouds: &[WalkerCloud]) -> Result<()> {
    let m = clouds.first().map(|c| c.len()).ok_or(Error::EmptyEnsemble)?;
    let mut w = writer(path)?;
    let mut header = vec!["k".to_string()];
    header.extend(clouds.iter().map(|c| format!("x{}", c.electron)));
    w.write_record(&header)?;
    for k in 0..m {
        let mut row = vec![k.to_string()];
        row.extend(clouds.iter().map(|c| c.positions[k].to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Long-format trajectories: `t, trajectory, x, engine`.
pub fn write_trajectories(path: &Path, bundles: &[(&str, &TrajectoryBundle)]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["t", "trajectory", "x", "engine"])?;
    for (engine, b) in bundles {
        for (j, p) in b.paths.iter().enumerate() {
            for (t, x) in b.times.iter().zip(p) {
                w.serialize((t, j, x, engine))?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_energy_trace(path: &Path, trace: &[TracePoint]) -> Result<()> {
    let mut w = writer(path)?;
    for p in trace {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
struct CsvEntry {
    file: String,
    columns: Vec<String>,
    rows: usize,
}

#[derive(Debug, Clone, Serialize)]
struct Manifest<'a> {
    mode: &'a str,
    seed: u64,
    threads: usize,
    files: Vec<CsvEntry>,
}

/// `manifest.json`: the column layout and row count of every CSV in `dir`,
/// with the seed and thread count of the run.
pub fn write_manifest(dir: &Path, mode: &str, seed: u64, threads: usize) -> Result<()> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    paths.sort();
    let mut files = Vec::with_capacity(paths.len());
    for path in paths {
        let mut r = csv::Reader::from_path(&path)?;
        let columns = r.headers()?.iter().map(String::from).collect();
        let rows = r.records().count();
        files.push(CsvEntry { file: path.file_name().unwrap_or_default().to_string_lossy().into_owned(), columns, rows });
    }
    write_json(&dir.join("manifest.json"), &Manifest { mode, seed, threads, files })
}

#[derive(Debug, Clone, Serialize)]
struct SnapshotHeader {
    format: &'static str,
    grid1: Grid1D,
    grid2: Grid1D,
    t: f64,
    layout: &'static str,
}

/// Raw little-endian `(re, im)` pairs of Ψ plus a `.json` header sidecar.
pub fn write_snapshot(path: &Path, state: &TwoBodyState) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for v in &state.psi.values {
        out.write_all(&v.re.to_le_bytes())?;
        out.write_all(&v.im.to_le_bytes())?;
    }
    out.flush()?;
    let header = SnapshotHeader {
        format: "f64-le complex",
        grid1: state.psi.grid1,
        grid2: state.psi.grid2,
        t: state.t,
        layout: "row-major, x2 fastest",
    };
    write_json(&path.with_extension("json"), &header)
}

/// Reads a dump written by [`write_snapshot`] back on the given grids.
pub fn read_snapshot(path: &Path, grid1: Grid1D, grid2: Grid1D, t: f64) -> Result<TwoBodyState> {
    let bytes = std::fs::read(path)?;
    let values = bytes
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().expect("8 bytes"));
            let im = f64::from_le_bytes(c[8..].try_into().expect("8 bytes"));
            num_complex::Complex64::new(re, im)
        })
        .collect();
    Ok(TwoBodyState { psi: crate::grid::WaveFn2D::new(grid1, grid2, values)?, t })
}
