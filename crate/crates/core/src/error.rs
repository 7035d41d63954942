use thiserror::Error;

use crate::training::FitReport;

pub type Result<T, E = GtmError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum GtmError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("parameter error at index {index}: {msg}")]
    Parameter { index: usize, msg: String },
    #[error("data error: {0}")]
    Data(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("non-finite objective at observation {index}")]
    NonFiniteObjective { index: usize },
    #[error("fit failed: {reason}")]
    Fit { reason: String, report: Box<FitReport> },
    #[error("sampling error: {0}")]
    Sampling(String),
    #[error("metric error: {0}")]
    Metric(String),
    #[error("hyperparameter search failed: every trial errored ({})", .0.join("; "))]
    Search(Vec<String>),
    #[error("model load error in field `{field}`: {msg}")]
    Load { field: String, msg: String },
    #[error("unsupported model format version {found} (this build reads version {expected})")]
    Version { found: u64, expected: u64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl GtmError {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        GtmError::Domain(msg.into())
    }

    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        GtmError::Dimension(msg.into())
    }

    pub(crate) fn data(msg: impl Into<String>) -> Self {
        GtmError::Data(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        GtmError::Config(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        GtmError::Numerical(msg.into())
    }
}
