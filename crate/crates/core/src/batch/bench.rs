use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{run_batch, BatchConfig};
use crate::error::Result;
use crate::race::{CompetitorSpec, RaceConfig};

/// Untimed batches run before measuring each point.
pub const WARMUP_RUNS: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchPoint {
    pub n_competitors: usize,
    /// Mean wall-clock seconds per race.
    pub mean_s: f64,
    pub sd_s: f64,
    pub cv: f64,
    pub reps: usize,
}

pub type BenchReport = Vec<BenchPoint>;

/// `race` with its field resized to `n`, cycling through the existing
/// competitors and renumbering ids `1..=n`.
pub fn with_competitors(race: &RaceConfig, n: usize) -> RaceConfig {
    let mut out = race.clone();
    out.competitors = (0..n)
        .map(|i| CompetitorSpec {
            id: i as u32 + 1,
            ..race.competitors[i % race.competitors.len()].clone()
        })
        .collect();
    out
}

/// Times `reps` batches per grid point after [`WARMUP_RUNS`] untimed ones.
/// Each timed sample is the batch's elapsed time divided by its replication
/// count.
pub fn bench(grid: &[BatchConfig], reps: usize) -> Result<BenchReport> {
    let reps = reps.max(2);
    grid.iter()
        .map(|cfg| {
            for _ in 0..WARMUP_RUNS {
                run_batch(cfg)?;
            }
            let mut samples = Vec::with_capacity(reps);
            for _ in 0..reps {
                let start = Instant::now();
                std::hint::black_box(run_batch(cfg)?);
                samples.push(start.elapsed().as_secs_f64() / cfg.replications as f64);
            }
            let mean = samples.iter().sum::<f64>() / reps as f64;
            let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
            let sd = var.sqrt();
            Ok(BenchPoint {
                n_competitors: cfg.race.n_competitors(),
                mean_s: mean,
                sd_s: sd,
                cv: sd / mean,
                reps,
            })
        })
        .collect()
}
