use thiserror::Error;

/// Errors produced by the solver, the problem oracles and the harness.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid set: {0}")]
    InvalidSet(String),

    #[error("diagonal metrics are only supported on boxes")]
    UnsupportedMetricSetPair,

    #[error("invalid metric: {0}")]
    InvalidMetric(String),

    #[error("point is not in the set (violation {violation:e})")]
    Infeasible { violation: f64 },

    #[error("theta strategy assumption violated: {0}")]
    StrategyAssumptionViolation(String),

    #[error("solver hit {iterations} iterations with residual {residual:e} (tol {tol:e})")]
    MaxItersExceeded {
        best: Vec<f64>,
        residual: f64,
        tol: f64,
        iterations: usize,
    },

    #[error("invalid constant {name}: {value}")]
    InvalidConstant { name: &'static str, value: f64 },

    #[error(
        "the dual route requires convex constraints, zero constraint curvature and a scalar objective curvature: {0}"
    )]
    ConvexityRequired(String),

    #[error("ledger is empty")]
    EmptyLedger,

    #[error("out-of-order round record: expected round {expected}, got {got}")]
    OutOfOrder { expected: usize, got: usize },

    #[error("drift sequence must start at zero, got {0}")]
    NonZeroStart(f64),

    #[error("offline oracle: {0}")]
    Offline(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}
