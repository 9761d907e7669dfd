use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("normal equations are singular (rank-deficient design)")]
    RankDeficient,
    #[error("separation detected: |coefficient| exceeded {cap}")]
    Separation { cap: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("likelihood-ratio statistic {0:e} is negative beyond tolerance")]
    ConvergenceSuspect(f64),
    #[error("unit {0} has no observations")]
    EmptyUnit(usize),
    #[error("threshold {threshold} outside 1..={max}")]
    ThresholdOutOfRange { threshold: usize, max: usize },
    #[error("threshold {0} given more than once")]
    DuplicateThreshold(usize),
    #[error("full fixed-effects model could not be fitted: {0}")]
    FullModelUnfit(String),
    #[error("m0 = {m0} exceeds the number of units {n}")]
    InvalidM0 { m0: usize, n: usize },
    #[error("intercepts have zero variance, cannot induce correlation")]
    ZeroVariance,
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("{failed} of {total} bootstrap replicates failed")]
    TooManyFailures { failed: usize, total: usize },
    #[error("{failed} of {total} replications failed for {method}")]
    SimulationFailures {
        method: String,
        failed: usize,
        total: usize,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("line {line}: {message}")]
    Input { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
