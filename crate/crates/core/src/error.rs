use thiserror::Error;

use crate::exchange::ExchangeError;

/// A configuration value that violates a constraint. `key` is the dotted path
/// of the offending field, e.g. `race.competitors[1].step_dist`.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid value at `{key}`: {constraint}")]
pub struct ConfigError {
    pub key: String,
    pub constraint: String,
}

impl ConfigError {
    pub fn new(key: impl Into<String>, constraint: impl Into<String>) -> Self {
        Self {
            key: key.into(),
            constraint: constraint.into(),
        }
    }

    /// Prefixes the key with an enclosing section.
    pub fn within(mut self, prefix: &str) -> Self {
        self.key = if self.key.is_empty() {
            prefix.to_string()
        } else if self.key.starts_with('[') {
            format!("{prefix}{}", self.key)
        } else {
            format!("{prefix}.{}", self.key)
        };
        self
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RaceError {
    #[error("race did not finish within {limit} ticks; check the step distributions")]
    TickLimit { limit: u64 },
    #[error("race is already finished")]
    AlreadyFinished,
    #[error("state does not match the race configuration: {0}")]
    StateMismatch(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("outcome spaces differ: {0}")]
    MismatchedSpaces(String),
    #[error("no outcomes supplied")]
    Empty,
    #[error("at least two groups with observations are required")]
    TooFewGroups,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Race(#[from] RaceError),
    #[error(transparent)]
    Exchange(#[from] ExchangeError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("run {index} failed: {source}")]
    Run {
        index: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed input {path}: {reason}")]
    Parse { path: String, reason: String },
    #[error("worker pool: {0}")]
    Pool(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
