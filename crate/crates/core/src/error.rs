use thiserror::Error;

/// Errors raised by the scheduling library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A network or experiment description violates a precondition.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A per-link vector does not have one entry per link.
    #[error("{what} has length {got}, expected {expected} (one entry per link)")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    /// Exhaustive enumeration was requested for a network that is too large.
    #[error("exhaustive enumeration supports at most {max} links, got {links}")]
    OracleScope { links: usize, max: usize },

    /// Observations handed to the learner contradict the slot outcome.
    #[error("inconsistent slot outcome: {0}")]
    Consistency(String),

    /// The policy cannot run on the configured feasible set.
    #[error("unsupported policy: {0}")]
    UnsupportedPolicy(String),

    /// A closed-form expression was evaluated outside its domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// A runtime invariant failed during simulation.
    #[error("invariant violated at slot {slot}: {message}")]
    Invariant { slot: u64, message: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
