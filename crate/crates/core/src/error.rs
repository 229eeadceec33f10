use thiserror::Error;

/// Errors raised by the control library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("state dimension must be at least 2 (got {0})")]
    DimensionTooSmall(usize),

    #[error("state is not normalized (norm {0})")]
    NotNormalized(f64),

    #[error("operator is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),

    #[error("control {index} = {value} outside bounds [{lo}, {hi}]")]
    ControlOutOfBounds {
        index: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("control vector has {got} components, model expects {expected}")]
    ControlCount { expected: usize, got: usize },

    #[error("segment {0} has non-positive duration {1}")]
    NonPositiveDuration(usize, f64),

    #[error("grid mismatch: {0} segments vs {1} segments")]
    GridMismatch(usize, usize),

    #[error("time average vanishes; optimality measure undefined")]
    UndefinedOptimality,

    #[error("perturbation too large: {0}")]
    PerturbationTooLarge(f64),

    #[error("no estimate possible: direct velocity {0} is not positive")]
    NoEstimate(f64),

    #[error("no qualifying trace sample: {0}")]
    NoQualifyingSample(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("eigendecomposition failed to isolate a single zero eigenvalue (found {0})")]
    ZeroEigenspace(usize),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
