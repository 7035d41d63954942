use std::fmt;

use gtm_core::GtmError;

/// Failure of a subcommand, classified by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad flag values or combinations (exit 2).
    Usage(String),
    /// Unreadable, malformed or mismatched input (exit 3).
    Data(String),
    /// Fitting, sampling or metric failure (exit 4).
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }

    pub fn io(path: &std::path::Path, e: impl fmt::Display) -> Self {
        CliError::Data(format!("{}: {e}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Numeric(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<GtmError> for CliError {
    fn from(e: GtmError) -> Self {
        let msg = e.to_string();
        match e {
            GtmError::Config(_) => CliError::Usage(msg),
            GtmError::Domain(_)
            | GtmError::Dimension(_)
            | GtmError::Data(_)
            | GtmError::Load { .. }
            | GtmError::Version { .. }
            | GtmError::Io(_) => CliError::Data(msg),
            _ => CliError::Numeric(msg),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
