use std::io;

/// Errors reported by every fallible operation in the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("global phase alignment is undefined: no estimated index matches the truth")]
    UndefinedAlignment,

    #[error("anchor component is numerically zero")]
    UnrecoverableAnchor,

    #[error("no nonnegative anchor magnitude is consistent with the measurements")]
    InconsistentMeasurement,

    #[error("frequency bins with vanishing magnitude: {0:?}")]
    UnresolvableBins(Vec<usize>),

    #[error("replica property violated in stage {stage}: deviation {deviation:.3e}")]
    Replica { stage: usize, deviation: f64 },

    #[error("unsupported mode: {0}")]
    Unsupported(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Parameter(msg.into()))
}
