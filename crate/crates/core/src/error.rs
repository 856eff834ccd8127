use alloc::string::String;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    Dimension { context: &'static str, expected: usize, found: usize },

    #[error("state {state} has no supported action")]
    InvalidSupport { state: usize },

    #[error("actions {first} and {second} share the same embedding")]
    InvalidEmbedding { first: usize, second: usize },

    #[error("value iteration diverged at iteration {iteration}")]
    Divergence { iteration: usize },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("normalized score undefined: expert and random references are equal")]
    UndefinedMetric,

    #[error("{what} out of range: {value}")]
    OutOfRange { what: &'static str, value: String },

    #[error("invalid probability data: {0}")]
    InvalidDistribution(String),

    #[error("{0} model is not trained")]
    Untrained(&'static str),

    #[error("invalid snapshot: {0}")]
    Snapshot(String),

    #[error("training aborted at step {step}: {reason}")]
    TrainingAborted { step: usize, reason: String },
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

pub(crate) fn ensure_dim(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::Dimension { context, expected, found })
    }
}
