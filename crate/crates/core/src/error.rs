use thiserror::Error;

/// Errors raised anywhere in the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("point {0} lies outside the unit interval")]
    OutOfDomain(String),
    #[error("branch {0} has no second derivative")]
    NoSecondDerivative(String),
    #[error("invalid family parameters: {0}")]
    InvalidFamilyParams(String),
    #[error("not renormalizable at depth {depth}: {reason}")]
    NotRenormalizable { depth: usize, reason: String },
    #[error("history of length {have} is too short for window k={k} (need {need})")]
    HistoryTooShort { have: usize, k: usize, need: usize },
    #[error("atoms do not tile the interval: {0}")]
    TilingViolation(String),
    #[error("inconsistent depths: {0}")]
    InconsistentDepths(String),
    #[error("partition does not refine its parent: {0}")]
    NotRefining(String),
    #[error("contraction factor must lie in (0,1), got {0}")]
    BadLambda(String),
    #[error("quadrature did not converge: {0}")]
    NonConvergent(String),
    #[error("bad grid: {0}")]
    BadGrid(String),
    #[error("grid too coarse: {0}")]
    GridInadequate(String),
    #[error("sign convention violated: {0}")]
    SignConventionViolation(String),
    #[error("runs are not comparable: {0}")]
    IncompatibleRuns(String),
    #[error("invalid precision settings: {0}")]
    BadPrecision(String),
    #[error("number parse error: {0}")]
    Parse(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

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
