use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("inconsistent distance inputs: radicand {radicand} below tolerance")]
    NegativeRadicand { radicand: f64 },

    #[error("insufficient results: have {have}, need {need}")]
    InsufficientResults { have: usize, need: usize },

    #[error("duplicate evaluation point {beta} from worker {worker}")]
    DuplicateBeta { worker: usize, beta: f64 },

    #[error("evaluation point mismatch for worker {worker}: expected {expected}, got {actual}")]
    BetaMismatch { worker: usize, expected: f64, actual: f64 },

    #[error("interpolation system ill-conditioned (condition estimate {condition:e})")]
    IllConditioned { condition: f64 },

    #[error("query timed out: required worker completion at {needed} exceeds timeout {timeout}")]
    Timeout { needed: f64, timeout: f64 },

    #[error("strategy/payload mismatch: {0}")]
    Configuration(String),

    #[error("shard format: {0}")]
    Format(String),

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
