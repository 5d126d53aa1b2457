//! Error type shared across the crate.

use crate::model::ObservationPattern;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    /// A precondition on arguments or data was violated.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A record in a case table is malformed or inconsistent.
    #[error("bad case data: {0}")]
    Data(String),

    /// No closed form exists for this (pattern, shape) combination; callers
    /// should fall back to `exposure::mc_tau_oracle`.
    #[error(
        "no closed form for expected pressure under pattern {pattern:?} with Erlang shape \
         {shape}; use exposure::mc_tau_oracle"
    )]
    NoClosedForm {
        pattern: ObservationPattern,
        shape: u32,
    },

    /// Conditional simulation failed to hit the target size window.
    #[error("conditional simulation failed: {attempts} attempts without final size in [{lo}, {hi}]")]
    ConditioningFailed { attempts: u64, lo: usize, hi: usize },

    /// Estimation is impossible on this data (e.g. no complete infectious
    /// period to calibrate the removal rate).
    #[error("cannot estimate: {0}")]
    Estimation(String),

    /// Too many bootstrap replicates were unusable to report an interval.
    #[error("bootstrap failed: {0}")]
    Bootstrap(String),

    /// The augmented-data sampler could not be initialized or stepped.
    #[error("mcmc failed: {0}")]
    Mcmc(String),
}
