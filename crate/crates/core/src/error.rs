use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Invalid configuration: grids, window widths, malformed config keys.
    #[error("configuration error: {0}")]
    Config(String),

    /// Input data violate an invariant (non-monotone cumulative counts,
    /// dangling infector references, empty files).
    #[error("data error: {0}")]
    Data(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("calibration failed: {0}")]
    Calibration(String),

    /// A non-finite value appeared while marching a solver.
    #[error("solver diverged at node {node} (t = {t}): {value}")]
    Divergence { node: usize, t: f64, value: f64 },

    #[error("resource limit exceeded: {0}")]
    Resource(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    /// True for errors caused by the numbers themselves rather than by
    /// the caller's inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Divergence { .. } | Error::Calibration(_))
    }
}
