use thiserror::Error;

/// Errors produced by the calculus, the bound engine and the simulator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Two processes that must share a horizon do not.
    #[error("horizon mismatch: {left} vs {right}")]
    Dimension { left: usize, right: usize },

    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A trace violates causality (departures ahead of arrivals).
    #[error("inconsistent trace at slot {slot}: departures {departures} exceed arrivals {arrivals}")]
    InconsistentTrace {
        slot: usize,
        arrivals: f64,
        departures: f64,
    },

    /// A documented precondition on a transform argument does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Invalid configuration value; `key` names the offending entry.
    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    /// No `s` on the scan makes the network stable.
    #[error("unstable: {0}")]
    Unstable(String),

    /// The simulator would retain more samples than its guard allows.
    #[error("resource limit: {0}")]
    ResourceLimit(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }

    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}
