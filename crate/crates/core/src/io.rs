//! CSV and JSON-lines writers for every data product, with matching readers.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::batch::{BenchPoint, FinishRecord, OutcomePMF};
use crate::error::{Error, Result};
use crate::exchange::SettlementRow;
use crate::race::Trajectory;
use crate::seed::RNG_ALGORITHM;
use crate::session::SentimentRow;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn parse_err(path: &Path, reason: impl ToString) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        reason: reason.to_string(),
    }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<File>> {
    csv::Writer::from_path(path).map_err(|e| parse_err(path, e))
}

/// Writes `rows` as CSV with a header taken from the row type's fields.
pub fn write_csv<T: Serialize>(path: &Path, rows: &[T], header: &[&str]) -> Result<()> {
    let mut w = csv_writer(path)?;
    if rows.is_empty() {
        w.write_record(header).map_err(|e| parse_err(path, e))?;
    }
    for r in rows {
        w.serialize(r).map_err(|e| parse_err(path, e))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| parse_err(path, e))?;
    r.deserialize()
        .map(|row| row.map_err(|e| parse_err(path, e)))
        .collect()
}

pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).map_err(io_err(path))?);
    for r in records {
        serde_json::to_writer(&mut w, r).map_err(|e| parse_err(path, e))?;
        w.write_all(b"\n").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let f = File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| parse_err(path, format!("line {}: {e}", i + 1)))?,
        );
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub tick: u64,
    pub competitor_id: u32,
    pub position: f64,
}

pub fn trajectory_rows(t: &Trajectory) -> Vec<TrajectoryRow> {
    t.snapshots
        .iter()
        .enumerate()
        .flat_map(|(tick, pos)| {
            pos.iter()
                .zip(&t.competitor_ids)
                .map(move |(&position, &competitor_id)| TrajectoryRow {
                    tick: tick as u64,
                    competitor_id,
                    position,
                })
        })
        .collect()
}

pub fn write_trajectory(path: &Path, t: &Trajectory) -> Result<()> {
    write_csv(
        path,
        &trajectory_rows(t),
        &["tick", "competitor_id", "position"],
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FinishSummaryRow {
    pub competitor_id: u32,
    pub finish_tick: u64,
    pub finish_rank: usize,
}

pub fn finish_summary(t: &Trajectory) -> Vec<FinishSummaryRow> {
    let ranks = t.outcome.ranks();
    (0..t.competitor_ids.len())
        .map(|c| FinishSummaryRow {
            competitor_id: t.competitor_ids[c],
            finish_tick: t.outcome.finish_ticks[c],
            finish_rank: ranks[c],
        })
        .collect()
}

pub fn write_finish_summary(path: &Path, t: &Trajectory) -> Result<()> {
    write_csv(
        path,
        &finish_summary(t),
        &["competitor_id", "finish_tick", "finish_rank"],
    )
}

pub fn write_sentiment(path: &Path, rows: &[SentimentRow]) -> Result<()> {
    write_csv(
        path,
        rows,
        &["time", "bettor_id", "competitor_id", "decimal_odds"],
    )
}

pub fn write_settlement(path: &Path, rows: &[SettlementRow]) -> Result<()> {
    write_csv(path, rows, &["bettor_id", "gross", "commission", "net"])
}

pub fn write_finish_times(path: &Path, rows: &[FinishRecord]) -> Result<()> {
    write_csv(
        path,
        rows,
        &["run", "competitor_id", "finish_tick", "finish_time"],
    )
}

pub fn write_bench(path: &Path, rows: &[BenchPoint]) -> Result<()> {
    write_csv(
        path,
        rows,
        &["n_competitors", "mean_s", "sd_s", "cv", "reps"],
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct PmfRow {
    outcome: String,
    count: u64,
    frequency: f64,
}

/// `outcome,count,frequency` with outcomes as hyphen-joined ids.
pub fn write_pmf(path: &Path, pmf: &OutcomePMF) -> Result<()> {
    let rows: Vec<PmfRow> = pmf
        .rows()
        .into_iter()
        .map(|(k, count, frequency)| PmfRow {
            outcome: k.iter().map(u32::to_string).collect::<Vec<_>>().join("-"),
            count,
            frequency,
        })
        .collect();
    write_csv(path, &rows, &["outcome", "count", "frequency"])
}

pub fn read_pmf(path: &Path) -> Result<OutcomePMF> {
    let rows: Vec<PmfRow> = read_csv(path)?;
    let mut counts = BTreeMap::new();
    for r in rows {
        let key = r
            .outcome
            .split('-')
            .map(str::parse)
            .collect::<std::result::Result<Vec<u32>, _>>()
            .map_err(|e| parse_err(path, format!("outcome {:?}: {e}", r.outcome)))?;
        if counts.insert(key, r.count).is_some() {
            return Err(parse_err(path, format!("duplicate outcome {}", r.outcome)));
        }
    }
    OutcomePMF::from_counts(counts).map_err(|e| parse_err(path, e))
}

/// Written beside every output set.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Metadata {
    pub config_digest: String,
    pub master_seed: u64,
    pub version: String,
    pub rng_algorithm: String,
}

impl Metadata {
    pub fn new(config_digest: String, master_seed: u64) -> Self {
        Self {
            config_digest,
            master_seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            rng_algorithm: RNG_ALGORITHM.to_string(),
        }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| parse_err(path, e))?;
    text.push('\n');
    std::fs::write(path, text).map_err(io_err(path))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| parse_err(path, e))
}
