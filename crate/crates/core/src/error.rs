use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("integration diverged at t = {time}")]
    IntegrationDiverged { time: f64 },

    #[error("diverged realization: |y| exceeded {limit:e} at step {step}")]
    DivergedRealization { step: usize, limit: f64 },

    #[error("degenerate series: {0}")]
    DegenerateSeries(String),

    #[error("out of bounds: {0}")]
    Bounds(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("insufficient coverage: only {non_empty} non-empty bins, need at least 3")]
    InsufficientCoverage { non_empty: usize },

    #[error("singular system: {0}")]
    SingularSystem(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("ill-conditioned kernel matrix: {0}")]
    IllConditioned(String),

    #[error("optimization failed: {0}")]
    OptimizationFailed(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Stable identifier used in machine-readable error lines and by the C ABI.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::IntegrationDiverged { .. } => "integration_diverged",
            Error::DivergedRealization { .. } => "diverged_realization",
            Error::DegenerateSeries(_) => "degenerate_series",
            Error::Bounds(_) => "bounds",
            Error::Domain(_) => "domain",
            Error::InsufficientCoverage { .. } => "insufficient_coverage",
            Error::SingularSystem(_) => "singular_system",
            Error::Shape { .. } => "shape",
            Error::IllConditioned(_) => "ill_conditioned",
            Error::OptimizationFailed(_) => "optimization_failed",
            Error::Config(_) => "config",
            Error::Parse(_) => "parse",
            Error::Io(_) => "io",
            Error::Csv(e) if e.is_io_error() => "io",
            Error::Csv(_) => "csv",
        }
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
