use std::path::PathBuf;

use crate::device::DeviceState;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A numeric argument lies outside the domain of the model.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("malformed trace {path}: line {line}: {reason}")]
    TraceFormat { path: PathBuf, line: usize, reason: String },

    #[error("invalid trace: {0}")]
    Trace(String),

    /// An uplink was recorded while the duty-cycle gate was closed.
    #[error("duty-cycle gate violated: uplink at {start} s before release at {release} s")]
    GateViolation { start: f64, release: f64 },

    #[error("illegal device transition {from:?} -> {to:?} at {time} s")]
    Transition {
        from: DeviceState,
        to: DeviceState,
        time: f64,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn config(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}
