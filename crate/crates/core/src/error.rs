use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("wavefunction norm underflowed ({0:e})")]
    ZeroNorm(f64),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("grids do not match")]
    GridMismatch,
    #[error("sample is empty")]
    EmptySample,
    #[error("bandwidth must be positive, got {0}")]
    NonPositiveBandwidth(f64),
    #[error("kernel width must be positive, got {0}")]
    NonPositiveSigma(f64),
    #[error("walker cloud is degenerate (all walkers coincide) and no sigma floor is set")]
    DegenerateCloud,
    #[error("inconsistent ensembles: {0}")]
    InconsistentEnsembles(String),
    #[error("wavefunction amplitude {amplitude:e} at x = {x} is below the node floor")]
    NodeProximity { x: f64, amplitude: f64 },
    #[error("tridiagonal solve failed at row {0}")]
    LinearSolveFailure(usize),
    #[error("branching killed the whole population")]
    PopulationCollapse,
    #[error("no convergence after {steps} steps (last change {last_change:e})")]
    NoConvergence { steps: usize, last_change: f64 },
    #[error("grid is not symmetric about the origin")]
    AsymmetricGrid,
    #[error("bound {0} lies outside the grid")]
    BoundOutsideGrid(f64),
    #[error("ensemble is empty")]
    EmptyEnsemble,
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("config parse error at line {line}, column {column}: {message}")]
    ConfigParse { line: usize, column: usize, message: String },
    #[error("config validation failed: {0}")]
    Validation(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// True for errors caused by bad input rather than by the numerics.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::ConfigParse { .. }
                | Error::Validation(_)
                | Error::InvalidParameter(_)
                | Error::InvalidGrid(_)
                | Error::AsymmetricGrid
                | Error::BoundOutsideGrid(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
