use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("event stream not sorted: event {position} at t={t} precedes t={previous}")]
    Unsorted { position: usize, t: f64, previous: f64 },

    #[error("event ({src},{dst}) at t={t} is not on the edge list")]
    PairNotInEdgeList { src: u32, dst: u32, t: f64 },

    #[error("self-pair ({0},{0}) is not allowed")]
    SelfPair(u32),

    #[error("node id {id} out of range for m={m}")]
    NodeOutOfRange { id: u32, m: usize },

    #[error("event time {t} outside [0, {horizon}]")]
    TimeOutOfRange { t: f64, horizon: f64 },

    #[error("window {got} processed out of order (expected {expected})")]
    WindowOrder { expected: usize, got: usize },

    #[error("excitation {value} >= 1 for block ({k},{l}): process is not stationary")]
    NonStationary { k: usize, l: usize, value: f64 },

    #[error("brute-force enumeration needs {configs} configurations (limit {limit})")]
    TooLarge { configs: f64, limit: f64 },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("numeric failure: {0}")]
    Numeric(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// True for failures caused by the numbers themselves rather than by bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::Numeric(_) | Error::NonStationary { .. })
    }
}
