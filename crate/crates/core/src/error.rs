use thiserror::Error;

/// Errors surfaced by the crowdtrace library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid location: {0}")]
    InvalidLocation(String),

    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("timestamp {t} is before the index epoch {epoch}")]
    BeforeEpoch { t: i64, epoch: i64 },

    #[error("segment {sid} crosses a time-bin boundary")]
    CrossBin { sid: String },

    #[error("decode error: {0}")]
    Decode(String),

    #[error("store error: {0}")]
    Store(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
