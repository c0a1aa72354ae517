//! Experiment configuration: one JSON document with `race`, `agents`,
//! `exchange`, `batch` and `outputs` sections. Unknown keys are rejected and
//! every omitted field takes the default shown by [`ExperimentConfig::defaults`].

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::agents::{AgentParams, Strategy};
use crate::batch::BatchConfig;
use crate::error::{ConfigError, Error, Result};
use crate::exchange::CommissionRate;
use crate::race::{CompetitorSpec, RaceConfig, ResponsivenessParams, StepDistribution};
use crate::session::SessionConfig;

fn d_commission() -> f64 {
    0.05
}
fn d_opening() -> f64 {
    60.0
}
fn d_depth() -> usize {
    3
}
fn d_replications() -> usize {
    1000
}
fn d_workers() -> usize {
    1
}
fn d_bench_sizes() -> Vec<usize> {
    vec![5, 10, 20, 40]
}
fn d_bench_reps() -> usize {
    10
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExchangeSection {
    /// Fraction of net winnings, e.g. 0.05.
    #[serde(default = "d_commission")]
    pub commission_rate: f64,
    /// Seconds of betting before the start.
    #[serde(default = "d_opening")]
    pub opening_period: f64,
    #[serde(default = "d_depth")]
    pub grid_depth: usize,
}

impl Default for ExchangeSection {
    fn default() -> Self {
        Self {
            commission_rate: d_commission(),
            opening_period: d_opening(),
            grid_depth: d_depth(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatchSection {
    #[serde(default = "d_replications")]
    pub replications: usize,
    #[serde(default = "d_workers")]
    pub workers: usize,
    #[serde(default)]
    pub master_seed: u64,
    /// Field sizes timed by the benchmark.
    #[serde(default = "d_bench_sizes")]
    pub bench_competitors: Vec<usize>,
    /// Timed batches per benchmark point.
    #[serde(default = "d_bench_reps")]
    pub bench_reps: usize,
}

impl Default for BatchSection {
    fn default() -> Self {
        Self {
            replications: d_replications(),
            workers: d_workers(),
            master_seed: 0,
            bench_competitors: d_bench_sizes(),
            bench_reps: d_bench_reps(),
        }
    }
}

/// File names written under the output directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputsSection {
    pub sentiment_logging: bool,
    pub trajectory: String,
    pub finish_summary: String,
    pub exchange_log: String,
    pub session_log: String,
    pub sentiment: String,
    pub settlement: String,
    pub pmf: String,
    pub finish_times: String,
    pub bench: String,
    pub metadata: String,
}

impl Default for OutputsSection {
    fn default() -> Self {
        Self {
            sentiment_logging: false,
            trajectory: "trajectory.csv".into(),
            finish_summary: "finish_summary.csv".into(),
            exchange_log: "exchange_log.jsonl".into(),
            session_log: "session_log.jsonl".into(),
            sentiment: "sentiment.csv".into(),
            settlement: "settlement.csv".into(),
            pmf: "pmf.csv".into(),
            finish_times: "finish_times.csv".into(),
            bench: "bench.csv".into(),
            metadata: "metadata.json".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub race: RaceConfig,
    #[serde(default)]
    pub agents: Vec<AgentParams>,
    #[serde(default)]
    pub exchange: ExchangeSection,
    #[serde(default)]
    pub batch: BatchSection,
    #[serde(default)]
    pub outputs: OutputsSection,
}

impl ExperimentConfig {
    /// A 2000 m, five-runner race with one agent of each kind.
    pub fn defaults() -> Self {
        let dists = [
            (10.0, 20.0),
            (1.0, 25.0),
            (11.0, 19.0),
            (9.0, 21.0),
            (12.0, 17.0),
        ];
        let competitors = dists
            .iter()
            .enumerate()
            .map(|(i, &(lo, hi))| CompetitorSpec {
                id: i as u32 + 1,
                step_dist: StepDistribution::uniform(lo, hi),
                pref: 0.5,
                pref_sensitivity: 0.0,
                resp: ResponsivenessParams::default(),
                theta: 2.0,
            })
            .collect();
        let mut race = RaceConfig::new(2000.0, competitors);
        race.race_factor = 0.5;
        let agents = [
            Strategy::Rp { d: 50 },
            Strategy::Linex { window: 10.0 },
            Strategy::Lw,
            Strategy::Ud { gap: 15.0 },
            Strategy::Btf,
            Strategy::Rb {
                gamma: 0.61,
                d: 5,
                stake_multiples: vec![1, 2, 5],
            },
            Strategy::Zi {
                odds_lo: 1.5,
                odds_hi: 20.0,
            },
        ]
        .into_iter()
        .map(|s| AgentParams {
            wake_jitter: 9.0,
            ..AgentParams::new(s)
        })
        .collect();
        Self {
            race,
            agents,
            exchange: ExchangeSection::default(),
            batch: BatchSection::default(),
            outputs: OutputsSection::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = serde_json::from_str(text)
            .map_err(|e| ConfigError::new(schema_key(&e), e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.race.validate().map_err(|e| e.within("race"))?;
        for (i, a) in self.agents.iter().enumerate() {
            a.validate()
                .map_err(|e| e.within(&format!("[{i}]")).within("agents"))?;
        }
        self.commission()?;
        let ex = &self.exchange;
        if !(ex.opening_period.is_finite() && ex.opening_period >= 0.0) {
            return Err(ConfigError::new("exchange.opening_period", "must be >= 0"));
        }
        if ex.grid_depth == 0 {
            return Err(ConfigError::new("exchange.grid_depth", "must be >= 1"));
        }
        let b = &self.batch;
        if b.replications == 0 {
            return Err(ConfigError::new("batch.replications", "must be >= 1"));
        }
        if b.workers == 0 {
            return Err(ConfigError::new("batch.workers", "must be >= 1"));
        }
        if b.bench_competitors.is_empty() || b.bench_competitors.contains(&0) {
            return Err(ConfigError::new(
                "batch.bench_competitors",
                "must be non-empty and positive",
            ));
        }
        if b.bench_reps < 2 {
            return Err(ConfigError::new("batch.bench_reps", "must be >= 2"));
        }
        Ok(())
    }

    pub fn commission(&self) -> Result<CommissionRate, ConfigError> {
        CommissionRate::from_fraction(self.exchange.commission_rate)
            .map_err(|e| ConfigError::new("exchange.commission_rate", e.to_string()))
    }

    pub fn session(&self, seed: u64) -> Result<SessionConfig, ConfigError> {
        Ok(SessionConfig {
            race: self.race.clone(),
            agents: self.agents.clone(),
            commission_rate: self.commission()?,
            opening_period: self.exchange.opening_period,
            grid_depth: self.exchange.grid_depth,
            sentiment_logging: self.outputs.sentiment_logging,
            seed,
        })
    }

    pub fn batch(&self) -> BatchConfig {
        BatchConfig::new(
            self.race.clone(),
            self.batch.replications,
            self.batch.workers,
            self.batch.master_seed,
        )
    }

    /// SHA-256 of the config's canonical JSON (defaults applied), hex encoded.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(
            serde_json::to_vec(self).expect("config serializes"),
        ))
    }
}

/// Best-effort key path for a serde error: the field named in the message,
/// or the tag-bearing field such as `step_dist`.
fn schema_key(e: &serde_json::Error) -> String {
    let msg = e.to_string();
    if let Some(rest) = msg.split("field `").nth(1) {
        if let Some(name) = rest.split('`').next() {
            return name.to_string();
        }
    }
    String::new()
}

/// Reads and validates a config file.
pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(ExperimentConfig::from_json(&text)?)
}
