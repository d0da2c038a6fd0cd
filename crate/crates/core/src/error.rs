use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("time window [{start}, {end}] is outside the sampled range [{t0}, {t1}]")]
    WindowOutOfRange { start: f64, end: f64, t0: f64, t1: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("Newton iteration did not converge (residual {residual:.3e} after {iterations} iterations)")]
    NewtonDiverged { residual: f64, iterations: usize },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("step {step} (t = {time}): {source}")]
    Step {
        step: usize,
        time: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("signal path is not of bounded variation ({0})")]
    NotBoundedVariation(String),

    #[error("partition gap {gap:.3e} at t = {at} underflows the minimum {min_gap:.3e}; signal too rough for this grid")]
    PartitionTooFine { gap: f64, min_gap: f64, at: f64 },

    #[error("invalid offsets: {0}")]
    SigmaOrdering(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
