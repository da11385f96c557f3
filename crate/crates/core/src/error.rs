use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the simulator.
///
/// Variants split into two families: validation problems (bad parameters,
/// malformed scenario files, infeasible operating conditions) and runtime
/// problems (I/O). The CLI maps them onto distinct exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("scenario parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("missing climate profile for zone {zone}, month {month}")]
    MissingClimateProfile { zone: String, month: u32 },

    #[error(
        "infeasible demand: no root of the minimum-temperature equation below {upper_bound} °C \
         (percentile volume {volume:.3} l, capacity {capacity} l)"
    )]
    InfeasibleDemand {
        volume: f64,
        capacity: f64,
        upper_bound: f64,
    },

    #[error("infeasible scenario: {0}")]
    InfeasibleScenario(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("output serialization failed: {0}")]
    Serialize(String),
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by user-supplied inputs rather than the runtime environment.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Io { .. } | Error::Serialize(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
