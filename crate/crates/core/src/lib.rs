//! Synthetic in-play betting data: a stochastic track-race simulator, a
//! back/lay betting exchange, a population of bettor agents, and tooling to
//! run, compare and time large batches of races.

pub mod agents;
pub mod batch;
pub mod config;
pub mod error;
pub mod exchange;
pub mod io;
pub mod race;
pub mod seed;
pub mod session;

pub use agents::{AgentParams, Strategy};
pub use batch::{BatchConfig, OutcomePMF};
pub use config::ExperimentConfig;
pub use error::{ConfigError, Error, RaceError, Result, StatsError};
pub use exchange::{BetId, BettorId, CommissionRate, MarketBook, Money, Odds, Side};
pub use race::{CompetitorSpec, RaceConfig, RaceOutcome, RaceState, StepDistribution, Trajectory};
pub use seed::derive_seed;
pub use session::{SessionConfig, SessionResult};
