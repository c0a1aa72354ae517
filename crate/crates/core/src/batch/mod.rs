//! Many independent races in parallel, outcome PMFs, significance tests and
//! wall-clock benchmarks.
//!
//! Run `i` of a batch is seeded with `derive_seed(master_seed, "race", [i])`,
//! so the results do not depend on how runs are spread over workers.

mod bench;
mod pmf;
mod stats;

pub use bench::{bench, with_competitors, BenchPoint, BenchReport, WARMUP_RUNS};
pub use pmf::{
    compare_pmf, estimate_pmf, ChiSquare, OutcomePMF, OutcomeSpace, FULL_ORDER_MAX_COMPETITORS,
};
pub use stats::{kruskal_wallis, KruskalWallis};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ConfigError, Error, Result};
use crate::race::{run_race_outcome, RaceConfig, RaceOutcome};
use crate::seed::derive_seed;

#[derive(Clone, Debug, PartialEq)]
pub struct BatchConfig {
    pub race: RaceConfig,
    pub replications: usize,
    pub workers: usize,
    pub master_seed: u64,
}

impl BatchConfig {
    pub fn new(race: RaceConfig, replications: usize, workers: usize, master_seed: u64) -> Self {
        Self {
            race,
            replications,
            workers,
            master_seed,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.race.validate().map_err(|e| e.within("race"))?;
        if self.replications == 0 {
            return Err(ConfigError::new("batch.replications", "must be >= 1"));
        }
        if self.workers == 0 {
            return Err(ConfigError::new("batch.workers", "must be >= 1"));
        }
        Ok(())
    }
}

/// Seed of run `index` in a batch.
pub fn run_seed(master_seed: u64, index: usize) -> u64 {
    derive_seed(master_seed, "race", &[index as u64])
}

/// Runs `f(0..runs)` on a pool of `workers` threads and returns the results
/// in index order. The first failing index (lowest) is reported.
pub fn run_indexed<T, F>(runs: usize, workers: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Pool(e.to_string()))?;
    let results: Vec<Result<T>> = pool.install(|| (0..runs).into_par_iter().map(&f).collect());
    results
        .into_iter()
        .enumerate()
        .map(|(index, r)| {
            r.map_err(|e| Error::Run {
                index,
                source: Box::new(e),
            })
        })
        .collect()
}

/// Runs the configured number of races. Element `i` is run `i`.
pub fn run_batch(config: &BatchConfig) -> Result<Vec<RaceOutcome>> {
    config.validate()?;
    run_indexed(config.replications, config.workers, |i| {
        run_race_outcome(&config.race, run_seed(config.master_seed, i)).map_err(Error::from)
    })
}

/// One row of a finish-time table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FinishRecord {
    pub run: usize,
    pub competitor_id: u32,
    pub finish_tick: u64,
    pub finish_time: f64,
}

/// Flattens batch outcomes into per-run, per-competitor finish records.
pub fn finish_records(race: &RaceConfig, outcomes: &[RaceOutcome]) -> Vec<FinishRecord> {
    let ids = race.competitor_ids();
    outcomes
        .iter()
        .enumerate()
        .flat_map(|(run, o)| {
            let ids = &ids;
            (0..ids.len()).map(move |c| FinishRecord {
                run,
                competitor_id: ids[c],
                finish_tick: o.finish_ticks[c],
                finish_time: o.finish_times[c],
            })
        })
        .collect()
}

/// Finish orders of `outcomes` as competitor ids.
pub fn finish_orders(race: &RaceConfig, outcomes: &[RaceOutcome]) -> Vec<Vec<u32>> {
    let ids = race.competitor_ids();
    outcomes
        .iter()
        .map(|o| o.finish_order.iter().map(|&c| ids[c]).collect())
        .collect()
}
