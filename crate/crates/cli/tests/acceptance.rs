//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails. Tolerances are the constants below.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use racebook_core::agents::{rp_predict, AgentParams, Strategy};
use racebook_core::batch::{
    bench, compare_pmf, estimate_pmf, finish_orders, run_batch, with_competitors, BatchConfig,
};
use racebook_core::config::ExperimentConfig;
use racebook_core::exchange::reference::ReferenceBook;
use racebook_core::exchange::{
    replay, BetId, BettorId, CommissionRate, MarketBook, Money, Odds, Side,
};
use racebook_core::race::{
    run_race, run_race_outcome, CompetitorSpec, RaceConfig, RaceState, ResponsivenessParams,
    StepDistribution,
};
use racebook_core::seed::stream;
use racebook_core::session::{run_session_with_workers, SessionConfig, SessionResult};

const RANDOM_RACES: usize = 10_000;
const MAX_FIELD: usize = 20;
const RACE_BUDGET: Duration = Duration::from_secs(60);
const SYMMETRY_RUNS: usize = 10_000;
const SYMMETRY_SIGMAS: f64 = 3.0;
const ORACLE_STREAMS: usize = 100;
const ORACLE_OPS: usize = 1_000;
const LEDGER_SESSIONS: usize = 1_000;
const DETERMINISM_RUNS: usize = 5;
const DETERMINISM_WORKERS: [usize; 3] = [1, 2, 8];
const MAX_RACE_TICKS: u64 = 360;
const LOGLOSS_RACES: usize = 1_000;
const LOGLOSS_DRY_RUNS: [u32; 3] = [0, 5, 50];
const LOGLOSS_SIGMAS: f64 = 2.0;
const SCALING_RACES: usize = 10_000;
const MIN_EFFICIENCY: f64 = 0.5;
const MAX_CV: f64 = 0.25;
const BENCH_FIELDS: [usize; 4] = [5, 10, 20, 40];
const BENCH_RACES: usize = 2_000;
const BENCH_REPS: usize = 5;
const COMPARE_REPS: usize = 100;
const COMPARE_RACES: usize = 2_000;
const ALPHA: f64 = 0.01;
const MAX_FALSE_REJECTIONS: usize = 5;
const MIN_TRUE_REJECTIONS: usize = 95;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn random_dist(rng: &mut ChaCha8Rng) -> StepDistribution {
    if rng.random_bool(0.5) {
        let lo = rng.random_range(0.5..20.0);
        StepDistribution::uniform(lo, lo + rng.random_range(0.0..20.0))
    } else {
        StepDistribution::Lognormal {
            mu: rng.random_range(0.0..3.0),
            sigma: rng.random_range(0.0..1.0),
            scale: rng.random_range(0.5..3.0),
        }
    }
}

fn random_race(rng: &mut ChaCha8Rng, max_field: usize, max_len: f64) -> RaceConfig {
    let n = rng.random_range(1..=max_field);
    let competitors = (0..n)
        .map(|i| CompetitorSpec {
            id: i as u32 + 1,
            step_dist: random_dist(rng),
            pref: rng.random_range(0.0..1.0),
            pref_sensitivity: rng.random_range(0.0..0.9),
            resp: ResponsivenessParams {
                early_mult: rng.random_range(0.5..2.0),
                late_mult: rng.random_range(0.5..2.0),
                breakpoint: rng.random_range(0.0..1.0),
            },
            theta: rng.random_range(0.0..10.0),
        })
        .collect();
    let mut race = RaceConfig::new(rng.random_range(50.0..max_len), competitors);
    race.race_factor = rng.random_range(0.0..1.0);
    race
}

fn termination() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let start = Instant::now();
    let mut violations = 0;
    for i in 0..RANDOM_RACES {
        let cfg = random_race(&mut rng, MAX_FIELD, 2000.0);
        let ok = match run_race(&cfg, i as u64) {
            Ok(t) => t.snapshots.windows(2).all(|w| {
                (0..cfg.n_competitors()).all(|c| w[1][c] > w[0][c] || w[0][c] >= cfg.track_length)
            }),
            Err(_) => false,
        };
        violations += usize::from(!ok);
    }
    let took = start.elapsed();
    check(
        violations == 0 && took < RACE_BUDGET,
        format!(
            "{RANDOM_RACES} races, {violations} violations, {:.1}s",
            took.as_secs_f64()
        ),
    )
}

fn identical_field(n: usize) -> RaceConfig {
    RaceConfig::new(
        2000.0,
        (1..=n as u32)
            .map(|i| CompetitorSpec::new(i, StepDistribution::uniform(10.0, 20.0)).with_theta(2.0))
            .collect(),
    )
}

fn symmetry() -> Outcome {
    let race = identical_field(4);
    let out = run_batch(&BatchConfig::new(race, SYMMETRY_RUNS, 1, 2)).map_err(|e| e.to_string())?;
    let mut wins = [0usize; 4];
    for o in &out {
        wins[o.winner()] += 1;
    }
    let sigma = (0.25 * 0.75 / SYMMETRY_RUNS as f64).sqrt();
    let freqs: Vec<f64> = wins
        .iter()
        .map(|&w| w as f64 / SYMMETRY_RUNS as f64)
        .collect();
    let worst = freqs
        .iter()
        .map(|f| (f - 0.25).abs() / sigma)
        .fold(0.0, f64::max);
    check(
        worst <= SYMMETRY_SIGMAS,
        format!("win frequencies {freqs:?}, max deviation {worst:.2} sigma"),
    )
}

fn matching_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let competitors = [1u32, 2, 3];
    for stream_no in 0..ORACLE_STREAMS {
        let mut book = MarketBook::new(competitors.to_vec());
        for b in 1..=6 {
            book.open_account(BettorId(b), Money(1 << 40)).unwrap();
        }
        let mut oracle = ReferenceBook::new();
        for op in 0..ORACLE_OPS {
            let time = op as f64;
            if rng.random_bool(0.75) || oracle.bets.is_empty() {
                let bettor = BettorId(rng.random_range(1..=6));
                let competitor = competitors[rng.random_range(0..3)];
                let side = if rng.random_bool(0.5) {
                    Side::Back
                } else {
                    Side::Lay
                };
                let odds = Odds::from_tick(rng.random_range(90..110)).unwrap();
                let stake = Money(rng.random_range(1..500));
                let got = book
                    .submit_bet(bettor, competitor, side, odds, stake, time)
                    .map_err(|e| e.to_string())?;
                let want = oracle.submit(bettor, competitor, side, odds, stake, time);
                if got.bet_id != want {
                    return Err(format!("stream {stream_no} op {op}: bet id mismatch"));
                }
            } else {
                let id = BetId(rng.random_range(1..=oracle.bets.len() as u64));
                let owner = oracle.bets[(id.0 - 1) as usize].bettor_id;
                if book
                    .cancel_bet(id, owner, time)
                    .map_err(|e| e.to_string())?
                    != oracle.cancel(id)
                {
                    return Err(format!(
                        "stream {stream_no} op {op}: cancel refund mismatch"
                    ));
                }
            }
        }
        if book.trades() != &oracle.trades[..] {
            return Err(format!("stream {stream_no}: match ledgers differ"));
        }
        let bets_agree = book.bets().iter().zip(&oracle.bets).all(|(b, r)| {
            (b.unmatched, b.matched, b.side, b.odds) == (r.unmatched, r.matched, r.side, r.odds)
        });
        if book.bets().len() != oracle.bets.len() || !bets_agree {
            return Err(format!("stream {stream_no}: bet states differ"));
        }
        for c in competitors {
            if book.ladder(c).map_err(|e| e.to_string())? != oracle.ladder(c) {
                return Err(format!("stream {stream_no}: ladder for {c} differs"));
            }
        }
        book.check_invariants()
            .map_err(|e| format!("stream {stream_no}: {e}"))?;
    }
    check(
        true,
        format!("{ORACLE_STREAMS} streams x {ORACLE_OPS} ops identical"),
    )
}

fn cheap_agents(rng: &mut ChaCha8Rng) -> Vec<AgentParams> {
    let n = rng.random_range(2..=8);
    (0..n)
        .map(|_| {
            let strategy = match rng.random_range(0..7) {
                0 => Strategy::Zi {
                    odds_lo: 1.2,
                    odds_hi: 15.0,
                },
                1 => Strategy::Lw,
                2 => Strategy::Ud {
                    gap: rng.random_range(1.0..30.0),
                },
                3 => Strategy::Btf,
                4 => Strategy::Linex {
                    window: rng.random_range(1.0..15.0),
                },
                5 => Strategy::Rp { d: 3 },
                _ => Strategy::Rb {
                    gamma: 0.61,
                    d: 3,
                    stake_multiples: vec![1, 2, 5],
                },
            };
            let mut a = AgentParams::new(strategy);
            a.reevaluate_every = rng.random_range(1..=10) as f64;
            a.wake_jitter = 5.0;
            a.initial_balance = Money(rng.random_range(0..5_000));
            a
        })
        .collect()
}

fn ledger_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut with_trades = 0;
    for s in 0..LEDGER_SESSIONS {
        let mut race = random_race(&mut rng, 5, 600.0);
        while race.n_competitors() < 2 {
            race = random_race(&mut rng, 5, 600.0);
        }
        let mut cfg = SessionConfig::new(race, cheap_agents(&mut rng), s as u64);
        cfg.opening_period = rng.random_range(0..30) as f64;
        cfg.commission_rate = CommissionRate::from_basis_points(rng.random_range(0..1000)).unwrap();
        let r = run_session_with_workers(&cfg, 1).map_err(|e| format!("session {s}: {e}"))?;
        let rebuilt = replay(
            r.book.competitor_ids().to_vec(),
            &r.deposits,
            &r.journal,
            |b| b.check_invariants(),
        )
        .map_err(|e| format!("session {s}: {e}"))?;
        if rebuilt != r.book {
            return Err(format!("session {s}: replay differs"));
        }
        let deltas: i64 = r
            .deposits
            .iter()
            .map(|&(id, deposit)| r.book.account(id).unwrap().balance.0 - deposit.0)
            .sum();
        // the commission account holds the commission plus the rounding remainder
        if deltas + r.settlement.exchange_take.0 != 0
            || r.settlement.net_sum() + r.settlement.exchange_take != Money::ZERO
        {
            return Err(format!(
                "session {s}: deltas {deltas}, commission {}",
                r.settlement.exchange_take
            ));
        }
        with_trades += usize::from(!r.book.trades().is_empty());
    }
    check(
        with_trades > LEDGER_SESSIONS / 2,
        format!("{LEDGER_SESSIONS} sessions zero-sum with commission, {with_trades} with trades, invariants after every event"),
    )
}

fn odds_examples() -> Outcome {
    let settle = |odds: f64, stake: i64| -> Result<i64, String> {
        let mut b = MarketBook::new(vec![1, 2]);
        b.open_account(BettorId(1), Money(1_000)).unwrap();
        b.open_account(BettorId(2), Money(1_000)).unwrap();
        let o = Odds::from_decimal(odds).map_err(|e| e.to_string())?;
        b.submit_bet(BettorId(1), 1, Side::Back, o, Money(stake), 0.0)
            .map_err(|e| e.to_string())?;
        b.submit_bet(BettorId(2), 1, Side::Lay, o, Money(stake), 0.0)
            .map_err(|e| e.to_string())?;
        b.close_betting(1.0).map_err(|e| e.to_string())?;
        b.settle(1, CommissionRate::from_basis_points(0).unwrap(), 2.0)
            .map_err(|e| e.to_string())?;
        Ok(b.account(BettorId(1)).unwrap().balance.0 - 1_000 + stake)
    };
    // total returned, stake included
    let eleven = settle(11.0, 1)?;
    let six = settle(1.2, 5)?;
    check(
        eleven == 11 && six == 6,
        format!("1 @ 11 returns {eleven}, 5 @ 1.2 returns {six}"),
    )
}

fn session_digest(cfg: &SessionConfig, workers: usize) -> Result<String, String> {
    let r: SessionResult = run_session_with_workers(cfg, workers).map_err(|e| e.to_string())?;
    let mut h = Sha256::new();
    for e in &r.events {
        h.update(serde_json::to_string(e).unwrap().as_bytes());
        h.update(b"\n");
    }
    Ok(hex::encode(h.finalize()))
}

fn determinism() -> Outcome {
    let cfg = ExperimentConfig::defaults()
        .session(2024)
        .map_err(|e| e.to_string())?;
    let mut digests = Vec::new();
    for &p in &DETERMINISM_WORKERS {
        for _ in 0..DETERMINISM_RUNS {
            digests.push(session_digest(&cfg, p)?);
        }
    }
    check(
        digests.iter().all(|d| d == &digests[0]),
        format!("{} runs, digest {}", digests.len(), &digests[0][..16]),
    )
}

fn read_rows(path: &Path) -> Result<(Vec<String>, Vec<csv::StringRecord>), String> {
    let mut r = csv::Reader::from_path(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let header = r
        .headers()
        .map_err(|e| e.to_string())?
        .iter()
        .map(String::from)
        .collect();
    let rows = r
        .records()
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    Ok((header, rows))
}

fn run_cli(dir: &Path, args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_racebook"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!(
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok(())
}

fn data_products() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let d = dir.path();
    let defaults = ExperimentConfig::defaults();
    if defaults.race.n_competitors() != 5
        || defaults.race.track_length != 2000.0
        || defaults.race.dt != 1.0
    {
        return Err("default race is not 5 runners over 2000 m at dt = 1".into());
    }
    run_cli(d, &["race", "--seed", "7"])?;
    let (header, rows) = read_rows(&d.join("trajectory.csv"))?;
    if header != ["tick", "competitor_id", "position"] || rows.is_empty() {
        return Err(format!("trajectory header {header:?}"));
    }
    let ticks = rows
        .iter()
        .map(|r| r[0].parse::<u64>().unwrap())
        .max()
        .unwrap();
    let (header, summary) = read_rows(&d.join("finish_summary.csv"))?;
    if header != ["competitor_id", "finish_tick", "finish_rank"] || summary.len() != 5 {
        return Err(format!(
            "finish summary header {header:?}, {} rows",
            summary.len()
        ));
    }

    let sdir = d.join("session");
    run_cli(&sdir, &["session", "--sentiment", "--seed", "7"])?;
    let (header, sentiment) = read_rows(&sdir.join("sentiment.csv"))?;
    if header != ["time", "bettor_id", "competitor_id", "decimal_odds"] || sentiment.is_empty() {
        return Err(format!("sentiment header {header:?}"));
    }
    if !sentiment
        .iter()
        .all(|r| r[3].parse::<f64>().is_ok_and(|o| o >= 1.0))
    {
        return Err("sentiment odds below 1 or unparsable".into());
    }
    let (_, strip) = read_rows(&sdir.join("trajectory.csv"))?;
    let session_ticks = strip
        .iter()
        .map(|r| r[0].parse::<u64>().unwrap())
        .max()
        .unwrap();

    // two horses, one pulling away: the leader's odds should shorten
    let race = identical_field(2);
    let gaps = [0.0, 40.0, 80.0, 120.0, 160.0];
    let mut odds = Vec::new();
    for (k, &gap) in gaps.iter().enumerate() {
        let state = RaceState::scripted(
            &race,
            60 + k as u64,
            vec![1000.0 + gap, 1000.0],
            vec![15.0, 15.0],
        )
        .map_err(|e| e.to_string())?;
        let p = rp_predict(&state, &race, 2_000, &mut stream(11)).map_err(|e| e.to_string())?;
        odds.push(1.0 / p.probs()[0]);
    }
    let monotone = odds.windows(2).all(|w| w[1] <= w[0]) && odds[odds.len() - 1] < odds[0];
    check(
        ticks < MAX_RACE_TICKS && session_ticks < MAX_RACE_TICKS && monotone,
        format!(
            "race {ticks} ticks, session race {session_ticks} ticks, {} sentiment rows, leader odds {:?}",
            sentiment.len(),
            odds.iter().map(|o| (o * 1000.0).round() / 1000.0).collect::<Vec<_>>()
        ),
    )
}

fn mean_sd(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, v.sqrt())
}

fn rp_log_loss() -> Outcome {
    let race = ExperimentConfig::defaults().race;
    let mut losses: Vec<Vec<f64>> = vec![Vec::new(); LOGLOSS_DRY_RUNS.len()];
    for i in 0..LOGLOSS_RACES {
        let seed = 10_000 + i as u64;
        let state = RaceState::start(&race, &mut stream(seed));
        let winner = run_race_outcome(&race, seed)
            .map_err(|e| e.to_string())?
            .winner();
        for (k, &d) in LOGLOSS_DRY_RUNS.iter().enumerate() {
            let p = rp_predict(&state, &race, d, &mut stream(seed ^ 0x5eed))
                .map_err(|e| e.to_string())?;
            losses[k].push(-p.probs()[winner].ln());
        }
    }
    let mut ok = true;
    let mut detail = Vec::new();
    for k in 0..LOGLOSS_DRY_RUNS.len() {
        let (m, _) = mean_sd(&losses[k]);
        detail.push(format!("d={} {m:.4}", LOGLOSS_DRY_RUNS[k]));
        if k > 0 {
            // paired on the same races
            let diff: Vec<f64> = losses[k]
                .iter()
                .zip(&losses[k - 1])
                .map(|(a, b)| a - b)
                .collect();
            let (dm, dsd) = mean_sd(&diff);
            ok &= dm <= LOGLOSS_SIGMAS * dsd / (diff.len() as f64).sqrt();
        }
    }
    check(ok, format!("mean log-loss {}", detail.join(", ")))
}

fn scaling() -> Outcome {
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    let race = ExperimentConfig::defaults().race;
    let time = |workers: usize| -> Result<f64, String> {
        let cfg = BatchConfig::new(race.clone(), SCALING_RACES, workers, 9);
        run_batch(&cfg).map_err(|e| e.to_string())?;
        let start = Instant::now();
        std::hint::black_box(run_batch(&cfg).map_err(|e| e.to_string())?);
        Ok(start.elapsed().as_secs_f64())
    };
    let t1 = time(1)?;
    let tp = time(cores)?;
    let speedup = t1 / tp;
    let grid: Vec<BatchConfig> = BENCH_FIELDS
        .iter()
        .map(|&n| BatchConfig::new(with_competitors(&race, n), BENCH_RACES, cores, 9))
        .collect();
    let report = bench(&grid, BENCH_REPS).map_err(|e| e.to_string())?;
    let max_cv = report.iter().map(|p| p.cv).fold(0.0, f64::max);
    let nondecreasing = report.windows(2).all(|w| w[1].mean_s >= w[0].mean_s);
    let per_race: Vec<String> = report
        .iter()
        .map(|p| format!("n={} {:.1}us", p.n_competitors, p.mean_s * 1e6))
        .collect();
    check(
        speedup >= MIN_EFFICIENCY * cores as f64 && max_cv < MAX_CV && nondecreasing,
        format!(
            "{cores} core(s), speedup {speedup:.2}, max CV {max_cv:.3}, per race {}",
            per_race.join(", ")
        ),
    )
}

fn rejections(a: &RaceConfig, b: &RaceConfig, base: u64) -> Result<usize, String> {
    let mut rejected = 0;
    for rep in 0..COMPARE_REPS as u64 {
        let pmf = |race: &RaceConfig, seed: u64| -> Result<_, String> {
            let out = run_batch(&BatchConfig::new(race.clone(), COMPARE_RACES, 1, seed))
                .map_err(|e| e.to_string())?;
            estimate_pmf(&finish_orders(race, &out)).map_err(|e| e.to_string())
        };
        let r = compare_pmf(&pmf(a, base + 2 * rep)?, &pmf(b, base + 2 * rep + 1)?)
            .map_err(|e| e.to_string())?;
        rejected += usize::from(r.p_value < ALPHA);
    }
    Ok(rejected)
}

fn comparison_harness() -> Outcome {
    let same = identical_field(3);
    let mut swapped = same.clone();
    swapped.competitors[0].step_dist = StepDistribution::uniform(1.0, 25.0);
    let false_rejections = rejections(&same, &same, 100_000)?;
    let true_rejections = rejections(&same, &swapped, 200_000)?;
    check(
        false_rejections <= MAX_FALSE_REJECTIONS && true_rejections >= MIN_TRUE_REJECTIONS,
        format!(
            "same config rejected {false_rejections}/{COMPARE_REPS}, swapped runner rejected {true_rejections}/{COMPARE_REPS}"
        ),
    )
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("termination and positivity", termination),
        ("symmetric field win frequencies", symmetry),
        ("matching equals list-scan oracle", matching_oracle),
        ("ledger identity and no-cross", ledger_identity),
        ("decimal odds worked examples", odds_examples),
        ("byte-identical session logs", determinism),
        ("race and sentiment data products", data_products),
        ("dry-run log-loss non-increasing", rp_log_loss),
        ("batch scaling", scaling),
        ("pmf comparison harness", comparison_harness),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("PASS {:>2} {name}: {d} ({secs:.1}s)", i + 1),
            Err(d) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {d} ({secs:.1}s)", i + 1);
            }
        }
    }
    println!("{} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
