use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("no active cells")]
    NoActiveCells,
    #[error("disconnected domain: {components} edge-connected components in the active mask")]
    DisconnectedDomain { components: usize },
    #[error("empty region")]
    EmptyRegion,
    #[error("empty well support")]
    EmptySupport,
    #[error("cell {cell} is not an active cell")]
    InactiveCell { cell: usize },
    #[error("cell {cell} is outside the grid")]
    CellOutOfRange { cell: usize },
    #[error("regions must be disjoint (A4): region `{new}` overlaps `{existing}` at cell {cell}")]
    RegionsOverlap { new: String, existing: String, cell: usize },
    #[error("non-finite value in {what} at index {index}")]
    NonFinite { what: &'static str, index: usize },
    #[error("{0} must be positive")]
    NonPositive(&'static str),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("linear solver did not converge after {iterations} iterations (relative residual {residual:e})")]
    SolverDiverged { iterations: usize, residual: f64 },
    #[error("rank-deficient demand matrix W (rank {rank} < {rows} rows)")]
    RankDeficientDemand { rank: usize, rows: usize },
    #[error("demand constraints incompatible with outputs: B0*Wbar has rank {rank} < {outputs}")]
    IncompatibleDemand { rank: usize, outputs: usize },
    #[error("nominal control matrix B0 is rank deficient (rank {rank} < {outputs}); A4 is violated")]
    RankDeficientB0 { rank: usize, outputs: usize },
    #[error("too many constraints: n_r + m = {constraints} exceeds n = {inputs}")]
    TooManyConstraints { constraints: usize, inputs: usize },
    #[error("assumption {assumption} violated: {detail}")]
    Assumption { assumption: &'static str, detail: String },
    #[error("negative seismicity-rate sample {value} at index {index}")]
    NegativeRate { index: usize, value: f64 },
    #[error("empty series: {0}")]
    EmptySeries(&'static str),
    #[error("simulation aborted at step {step} (t = {t} yr): {reason}")]
    Aborted { step: usize, t: f64, reason: String },
    #[error("failed to parse {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        Error::Csv {
            path: path.into(),
            source,
        }
    }
}

pub(crate) fn check_finite(what: &'static str, xs: &[f64]) -> Result<()> {
    match xs.iter().position(|x| !x.is_finite()) {
        Some(index) => Err(Error::NonFinite { what, index }),
        None => Ok(()),
    }
}
