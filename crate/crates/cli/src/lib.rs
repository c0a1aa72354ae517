//! Command-line surface of the simulator.
//!
//! Exit codes: 0 success, 1 usage error, 2 runtime error. Failures also print
//! one JSON object on standard error, e.g.
//! `{"error":"runtime","message":"...","key":"race.competitors[1].step_dist"}`.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use racebook_core::batch::{
    bench, compare_pmf, estimate_pmf, finish_orders, finish_records, kruskal_wallis, run_batch,
    with_competitors, BatchConfig, FinishRecord,
};
use racebook_core::config::{parse_config, ExperimentConfig};
use racebook_core::io::{self, Metadata};
use racebook_core::race::run_race;
use racebook_core::seed::derive_seed;
use racebook_core::session::run_session_with_workers;
use racebook_core::{ConfigError, Error};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "racebook",
    version,
    about = "Race, betting-exchange and bettor-agent simulator"
)]
pub struct Cli {
    /// Experiment config (JSON). Built-in defaults when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Master seed; overrides `batch.master_seed`.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long, global = true, value_name = "DIR", default_value = ".")]
    pub out: PathBuf,
    /// Worker threads; overrides `batch.workers`.
    #[arg(long, global = true, value_name = "P")]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Test {
    /// Chi-square homogeneity on two PMF files.
    Chi2,
    /// Kruskal-Wallis on two finish-time files.
    Kw,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// One race: trajectory and finish summary CSVs.
    Race,
    /// A full in-play session: race, exchange and agent logs.
    Session {
        /// Also write the per-agent odds series.
        #[arg(long)]
        sentiment: bool,
    },
    /// Many races in parallel: outcome PMF and finish times.
    Batch {
        /// Overrides `batch.replications`.
        #[arg(long, value_name = "R")]
        replications: Option<usize>,
    },
    /// Compares two batch outputs; prints the statistic and p-value as JSON.
    Compare {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, value_enum, default_value = "chi2")]
        test: Test,
        /// Competitor whose finish times are compared (kw only).
        #[arg(long, value_name = "ID")]
        competitor: Option<u32>,
    },
    /// Times batches over a range of field sizes.
    Bench {
        /// Overrides `batch.bench_reps`.
        #[arg(long, value_name = "N")]
        reps: Option<usize>,
    },
    /// Prints the full default config.
    Defaults,
}

fn error_line(kind: &str, message: &str, key: Option<&str>) -> String {
    let mut v = json!({ "error": kind, "message": message });
    if let Some(k) = key {
        v["key"] = json!(k);
    }
    v.to_string()
}

fn config_key(e: &Error) -> Option<&str> {
    match e {
        Error::Config(ConfigError { key, .. }) => Some(key),
        Error::Race(racebook_core::RaceError::Config(ConfigError { key, .. })) => Some(key),
        Error::Run { source, .. } => config_key(source),
        _ => None,
    }
}

/// Parses `args` (program name first) and runs the command. Returns the
/// process exit code.
pub fn dispatch<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return EXIT_OK;
            }
            eprintln!("{}", error_line("usage", e.to_string().trim(), None));
            return EXIT_USAGE;
        }
    };
    match run(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("{}", error_line("runtime", &e.to_string(), config_key(&e)));
            EXIT_RUNTIME
        }
    }
}

fn load(cli: &Cli) -> Result<ExperimentConfig, Error> {
    let mut cfg = match &cli.config {
        Some(p) => parse_config(p)?,
        None => ExperimentConfig::defaults(),
    };
    if let Some(s) = cli.seed {
        cfg.batch.master_seed = s;
    }
    if let Some(w) = cli.workers {
        if w == 0 {
            return Err(ConfigError::new("--workers", "must be >= 1").into());
        }
        cfg.batch.workers = w;
    }
    Ok(cfg)
}

fn out_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}

fn write_metadata(dir: &Path, cfg: &ExperimentConfig) -> Result<(), Error> {
    io::write_json(
        &out_path(dir, &cfg.outputs.metadata),
        &Metadata::new(cfg.digest(), cfg.batch.master_seed),
    )
}

/// Runs a parsed command.
pub fn run(cli: &Cli) -> Result<(), Error> {
    if let Command::Compare {
        a,
        b,
        test,
        competitor,
    } = &cli.command
    {
        return compare(a, b, *test, *competitor);
    }
    let mut cfg = load(cli)?;
    if let Command::Defaults = cli.command {
        println!("{}", cfg.to_json());
        return Ok(());
    }
    let dir = cli.out.as_path();
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let seed = cfg.batch.master_seed;
    let o = cfg.outputs.clone();
    match &cli.command {
        Command::Race => {
            let t = run_race(&cfg.race, derive_seed(seed, "race", &[]))?;
            io::write_trajectory(&out_path(dir, &o.trajectory), &t)?;
            io::write_finish_summary(&out_path(dir, &o.finish_summary), &t)?;
            println!(
                "{}",
                json!({ "ticks": t.outcome.ticks, "winner": t.competitor_ids[t.outcome.winner()] })
            );
        }
        Command::Session { sentiment } => {
            cfg.outputs.sentiment_logging |= *sentiment;
            let r = run_session_with_workers(&cfg.session(seed)?, cfg.batch.workers)?;
            io::write_trajectory(&out_path(dir, &o.trajectory), &r.trajectory)?;
            io::write_finish_summary(&out_path(dir, &o.finish_summary), &r.trajectory)?;
            io::write_jsonl(&out_path(dir, &o.exchange_log), &r.journal)?;
            io::write_jsonl(&out_path(dir, &o.session_log), &r.events)?;
            io::write_settlement(&out_path(dir, &o.settlement), &r.settlement.rows)?;
            if cfg.outputs.sentiment_logging {
                io::write_sentiment(&out_path(dir, &o.sentiment), &r.sentiment)?;
            }
            println!(
                "{}",
                json!({
                    "ticks": r.trajectory.outcome.ticks,
                    "winner": r.settlement.winner,
                    "trades": r.book.trades().len(),
                    "exchange_take": r.settlement.exchange_take.0,
                })
            );
        }
        Command::Batch { replications } => {
            if let Some(r) = replications {
                cfg.batch.replications = *r;
            }
            cfg.validate()?;
            let bc = cfg.batch();
            let out = run_batch(&bc)?;
            let pmf = estimate_pmf(&finish_orders(&bc.race, &out))?;
            io::write_pmf(&out_path(dir, &o.pmf), &pmf)?;
            io::write_finish_times(
                &out_path(dir, &o.finish_times),
                &finish_records(&bc.race, &out),
            )?;
            println!(
                "{}",
                json!({ "replications": bc.replications, "outcomes": pmf.counts.len() })
            );
        }
        Command::Bench { reps } => {
            if let Some(r) = reps {
                cfg.batch.bench_reps = *r;
            }
            cfg.validate()?;
            let grid: Vec<BatchConfig> = cfg
                .batch
                .bench_competitors
                .iter()
                .map(|&n| {
                    BatchConfig::new(
                        with_competitors(&cfg.race, n),
                        cfg.batch.replications,
                        cfg.batch.workers,
                        seed,
                    )
                })
                .collect();
            let report = bench(&grid, cfg.batch.bench_reps)?;
            io::write_bench(&out_path(dir, &o.bench), &report)?;
            for p in &report {
                println!("{}", serde_json::to_string(p).expect("serializable"));
            }
        }
        Command::Compare { .. } | Command::Defaults => unreachable!("handled above"),
    }
    write_metadata(dir, &cfg)
}

fn compare(a: &Path, b: &Path, test: Test, competitor: Option<u32>) -> Result<(), Error> {
    match test {
        Test::Chi2 => {
            let r = compare_pmf(&io::read_pmf(a)?, &io::read_pmf(b)?)?;
            println!(
                "{}",
                json!({ "test": "chi2", "statistic": r.statistic, "dof": r.dof, "p_value": r.p_value })
            );
        }
        Test::Kw => {
            let pick = |path: &Path| -> Result<Vec<f64>, Error> {
                let rows: Vec<FinishRecord> = io::read_csv(path)?;
                let id = competitor.or_else(|| rows.first().map(|r| r.competitor_id));
                Ok(rows
                    .iter()
                    .filter(|r| Some(r.competitor_id) == id)
                    .map(|r| r.finish_time)
                    .collect())
            };
            let (xa, xb) = (pick(a)?, pick(b)?);
            let r = kruskal_wallis(&[&xa, &xb])?;
            println!(
                "{}",
                json!({ "test": "kw", "statistic": r.statistic, "dof": r.dof, "p_value": r.p_value })
            );
        }
    }
    Ok(())
}
