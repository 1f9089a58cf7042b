use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("path not simulated this far (requested t = {requested}, horizon = {horizon})")]
    NotSimulated { requested: f64, horizon: f64 },

    #[error("event cap of {cap} exceeded; the epidemic did not go extinct")]
    EventCapExceeded { cap: u64 },

    #[error("thinning bound {bound} below instantaneous detection rate {rate} at t = {time}")]
    ThinningBound { time: f64, rate: f64, bound: f64 },

    #[error("final-size system numerically unstable for this s0 ({s0}): {detail}")]
    NumericallyUnstable { s0: u64, detail: String },

    #[error("brute-force enumeration refuses s0 = {s0} (limit {limit})")]
    TooLarge { s0: u64, limit: u64 },

    #[error("no progress: every score equals the previous level {level}")]
    NoProgress { level: f64 },

    #[error("unsupported combination: {0}")]
    Unsupported(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("replication {index}: {source}")]
    Run {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
