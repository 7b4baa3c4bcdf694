use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("time interval [{t0}, {t1}] lies outside the protocol [0, {tau}]")]
    IntervalOutsideProtocol { t0: f64, t1: f64, tau: f64 },

    #[error("unknown channel index {0}")]
    UnknownChannel(usize),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid model: {}", .0.join("; "))]
    InvalidModel(Vec<String>),

    #[error("generator null space has dimension {0}, expected 1")]
    DegenerateSteadyState(usize),

    #[error("state lost positivity: minimum eigenvalue {0:e}")]
    PositivityViolation(f64),

    #[error("invalid record: {0}")]
    InvalidRecord(String),

    #[error("visible jump at t = {time} through channel {channel} has zero probability")]
    ImpossibleJump { time: f64, channel: usize },

    #[error("record has zero probability: {0}")]
    ZeroProbability(String),

    #[error("entropy production diverges for record {record}: {reason}")]
    Divergent { record: String, reason: String },

    #[error("attempt budget of {cap} exceeded while sampling hidden interval {interval}")]
    AttemptBudgetExceeded { interval: usize, cap: u64 },

    #[error("enumeration budget exceeded: {leaves} leaves > limit {limit}")]
    EnumerationBudgetExceeded { leaves: u128, limit: u128 },

    #[error("discrete grid too coarse: dt * |sum L^dag L| = {0:.4} > 1")]
    GridTooCoarse(f64),

    #[error("record parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
