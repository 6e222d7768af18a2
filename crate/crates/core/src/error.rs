use thiserror::Error;

/// Errors raised by the estimators, simulators and file loaders.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {actual} ({what})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    /// Every item vote share sits at 1/2, so the prevalence quadratic is undefined.
    #[error("degenerate moments: denominator {denominator:e} below 1e-12")]
    DegenerateMoments { denominator: f64 },

    /// |2π − 1| is below the configured floor; the moment initializer would divide by ~0.
    #[error("degenerate prevalence estimate: |2π-1| = {gap} < floor {floor}")]
    DegeneratePi { gap: f64, floor: f64 },

    #[error("lower bound needs n >= {required} in this regime, got n = {n}")]
    RegimeTooSmall { n: usize, required: usize },

    #[error("worker {worker} has boundary ability {value}; residuals need p in (0,1)")]
    BoundaryAbility { worker: usize, value: f64 },

    #[error("instance too large for the grid oracle: {0}")]
    TooLarge(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("duplicate label for worker {worker:?} on item {item:?} (line {line})")]
    DuplicateLabel {
        worker: String,
        item: String,
        line: usize,
    },

    #[error("truth file names item {item:?} (line {line}) that has no labels")]
    UnknownItemInTruth { item: String, line: usize },

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
