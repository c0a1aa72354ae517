//! One race, one market and a population of agents on a single timeline.
//!
//! Session time is measured in seconds from market open. The race starts at
//! `opening_period`; tick `k` happens at `opening_period + k * dt`. A race
//! tick is processed before any agent wake scheduled for the same instant.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agents::{Agent, AgentParams, Decision, Observation, OpenBet, OrderAction};
use crate::error::{ConfigError, Error, Result};
use crate::exchange::{
    BettorId, CommissionRate, ExchangeEvent, ExchangeRecord, MarketBook, MarketGrid, Money,
    SettlementReport,
};
use crate::race::{RaceConfig, RaceOutcome, RaceState, Trajectory};
use crate::seed::{derive_seed, stream};

#[derive(Clone, Debug, PartialEq)]
pub struct SessionConfig {
    pub race: RaceConfig,
    pub agents: Vec<AgentParams>,
    pub commission_rate: CommissionRate,
    /// Seconds of betting before the start.
    pub opening_period: f64,
    pub grid_depth: usize,
    pub sentiment_logging: bool,
    pub seed: u64,
}

impl SessionConfig {
    pub fn new(race: RaceConfig, agents: Vec<AgentParams>, seed: u64) -> Self {
        Self {
            race,
            agents,
            commission_rate: CommissionRate::DEFAULT,
            opening_period: 60.0,
            grid_depth: 3,
            sentiment_logging: false,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.race.validate().map_err(|e| e.within("race"))?;
        for (i, a) in self.agents.iter().enumerate() {
            a.validate()
                .map_err(|e| e.within(&format!("[{i}]")).within("agents"))?;
        }
        if !(self.opening_period.is_finite() && self.opening_period >= 0.0) {
            return Err(ConfigError::new("exchange.opening_period", "must be >= 0"));
        }
        if self.grid_depth == 0 {
            return Err(ConfigError::new("exchange.grid_depth", "must be >= 1"));
        }
        Ok(())
    }
}

/// Non-exchange entries of the session log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SessionNote {
    RaceTick {
        tick: u64,
        positions: Vec<f64>,
    },
    GridSnapshot {
        grid: MarketGrid,
    },
    /// Fair odds per competitor; `None` where the agent gives no chance.
    Sentiment {
        bettor_id: BettorId,
        odds: Vec<Option<f64>>,
    },
    Rejected {
        bettor_id: BettorId,
        action: OrderAction,
        reason: String,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SessionPayload {
    Exchange(ExchangeEvent),
    Note(SessionNote),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionEvent {
    pub seq: u64,
    pub time: f64,
    #[serde(flatten)]
    pub payload: SessionPayload,
}

/// One row of the per-agent sentiment series.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SentimentRow {
    pub time: f64,
    pub bettor_id: u32,
    pub competitor_id: u32,
    pub decimal_odds: f64,
}

#[derive(Clone, Debug)]
pub struct SessionResult {
    pub events: Vec<SessionEvent>,
    /// The exchange's own journal, replayable with `deposits`.
    pub journal: Vec<ExchangeRecord>,
    pub deposits: Vec<(BettorId, Money)>,
    pub settlement: SettlementReport,
    pub trajectory: Trajectory,
    pub sentiment: Vec<SentimentRow>,
    pub book: MarketBook,
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Wake {
    time: f64,
    agent: usize,
    k: u64,
}

impl Eq for Wake {}

impl Ord for Wake {
    // reversed so the max-heap pops the earliest wake, then the lowest index
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.agent.cmp(&self.agent))
    }
}

impl PartialOrd for Wake {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Endless periodic wakes: agent `i` wakes at `offsets[i] + k * periods[i]`.
/// Yields `(time, agent)` in time order, ties by agent index.
#[derive(Clone, Debug)]
pub struct WakeSchedule {
    offsets: Vec<f64>,
    periods: Vec<f64>,
    heap: BinaryHeap<Wake>,
}

impl WakeSchedule {
    pub fn new(offsets: Vec<f64>, periods: Vec<f64>) -> Self {
        assert_eq!(offsets.len(), periods.len());
        let heap = offsets
            .iter()
            .enumerate()
            .map(|(agent, &time)| Wake { time, agent, k: 0 })
            .collect();
        Self {
            offsets,
            periods,
            heap,
        }
    }

    pub fn peek_time(&self) -> Option<f64> {
        self.heap.peek().map(|w| w.time)
    }
}

impl Iterator for WakeSchedule {
    type Item = (f64, usize);

    fn next(&mut self) -> Option<(f64, usize)> {
        let w = self.heap.pop()?;
        let k = w.k + 1;
        self.heap.push(Wake {
            time: self.offsets[w.agent] + k as f64 * self.periods[w.agent],
            agent: w.agent,
            k,
        });
        Some((w.time, w.agent))
    }
}

/// Fixed wake offset of agent `index`: whole seconds uniform in
/// `[0, floor(wake_jitter)]`.
pub fn agent_jitter(seed: u64, index: usize, wake_jitter: f64) -> f64 {
    let hi = wake_jitter.floor() as u64;
    if hi == 0 {
        return 0.0;
    }
    stream(derive_seed(seed, "wake", &[index as u64])).random_range(0..=hi) as f64
}

/// All wakes up to and including `horizon`.
pub fn wake_schedule(agents: &[AgentParams], seed: u64, horizon: f64) -> Vec<(f64, usize)> {
    let offsets = agents
        .iter()
        .enumerate()
        .map(|(i, a)| agent_jitter(seed, i, a.wake_jitter))
        .collect();
    let periods = agents.iter().map(|a| a.reevaluate_every).collect();
    WakeSchedule::new(offsets, periods)
        .take_while(|&(t, _)| t <= horizon)
        .collect()
}

struct Log {
    events: Vec<SessionEvent>,
    journal_seen: usize,
}

impl Log {
    fn push(&mut self, time: f64, payload: SessionPayload) {
        let seq = self.events.len() as u64 + 1;
        self.events.push(SessionEvent { seq, time, payload });
    }

    fn note(&mut self, time: f64, note: SessionNote) {
        self.push(time, SessionPayload::Note(note));
    }

    /// Copies exchange entries not yet mirrored into the session log.
    fn sync(&mut self, book: &MarketBook) {
        for rec in &book.journal()[self.journal_seen..] {
            let seq = self.events.len() as u64 + 1;
            self.events.push(SessionEvent {
                seq,
                time: rec.time,
                payload: SessionPayload::Exchange(rec.event.clone()),
            });
        }
        self.journal_seen = book.journal().len();
    }
}

fn open_bets(book: &MarketBook, bettor: BettorId) -> Vec<OpenBet> {
    let ids = book.competitor_ids();
    book.open_bets(bettor)
        .map(|b| OpenBet {
            bet_id: b.bet_id,
            competitor: ids
                .iter()
                .position(|&c| c == b.competitor_id)
                .expect("known competitor"),
            side: b.side,
            odds: b.odds,
            unmatched: b.unmatched,
            arrival_time: b.arrival_time,
        })
        .collect()
}

fn apply(
    book: &mut MarketBook,
    bettor: BettorId,
    action: &OrderAction,
    time: f64,
) -> std::result::Result<(), String> {
    let res = match *action {
        OrderAction::Place {
            competitor,
            side,
            odds,
            stake,
        } => match book.competitor_ids().get(competitor).copied() {
            Some(id) => book
                .submit_bet(bettor, id, side, odds, stake, time)
                .map(|_| ()),
            None => return Err(format!("no competitor at index {competitor}")),
        },
        OrderAction::Cancel { bet_id } => book.cancel_bet(bet_id, bettor, time).map(|_| ()),
    };
    res.map_err(|e| e.to_string())
}

/// Runs a session on the current rayon pool.
pub fn run_session(config: &SessionConfig) -> Result<SessionResult> {
    config.validate()?;
    let race = &config.race;
    let ids = race.competitor_ids();
    let mut book = MarketBook::new(ids.clone());
    let mut deposits = Vec::with_capacity(config.agents.len());
    let mut agents: Vec<Agent> = Vec::with_capacity(config.agents.len());
    for (i, params) in config.agents.iter().enumerate() {
        let bettor_id = BettorId(i as u32 + 1);
        book.open_account(bettor_id, params.initial_balance)?;
        deposits.push((bettor_id, params.initial_balance));
        agents.push(Agent {
            bettor_id,
            params: params.clone(),
            rng: stream(derive_seed(config.seed, "agent", &[i as u64])),
            jitter: agent_jitter(config.seed, i, params.wake_jitter),
        });
    }
    let mut schedule = WakeSchedule::new(
        agents.iter().map(|a| a.jitter).collect(),
        agents.iter().map(|a| a.params.reevaluate_every).collect(),
    );

    let mut race_rng = stream(derive_seed(config.seed, "race", &[]));
    let mut state = RaceState::start(race, &mut race_rng);
    let mut history = vec![state.positions.clone()];
    let mut log = Log {
        events: Vec::new(),
        journal_seen: 0,
    };
    let mut sentiment = Vec::new();
    let tick_time = |t: u64| config.opening_period + t as f64 * race.dt;
    let needed = race.betting_close.finishers_required(race.n_competitors());

    // betting phase
    loop {
        let next_tick = tick_time(state.t + 1);
        match schedule.peek_time() {
            Some(w) if w < next_tick => {}
            _ => {
                if state.t >= race.tick_limit {
                    return Err(crate::RaceError::TickLimit {
                        limit: race.tick_limit,
                    }
                    .into());
                }
                state.advance(race, &mut race_rng)?;
                history.push(state.positions.clone());
                log.note(
                    next_tick,
                    SessionNote::RaceTick {
                        tick: state.t,
                        positions: state.positions.clone(),
                    },
                );
                if state.n_finished() >= needed {
                    book.close_betting(next_tick)?;
                    log.sync(&book);
                    break;
                }
                continue;
            }
        }

        let now = schedule.peek_time().expect("peeked");
        let mut due = vec![false; agents.len()];
        while schedule.peek_time() == Some(now) {
            let (_, a) = schedule.next().expect("peeked");
            due[a] = true;
        }
        let grid = book.market_grid(config.grid_depth);
        log.note(now, SessionNote::GridSnapshot { grid: grid.clone() });
        let views: Vec<Option<(Vec<OpenBet>, Money)>> = agents
            .iter()
            .zip(&due)
            .map(|(a, &d)| {
                d.then(|| {
                    let balance = book
                        .account(a.bettor_id)
                        .map(|acc| acc.balance)
                        .unwrap_or_default();
                    (open_bets(&book, a.bettor_id), balance)
                })
            })
            .collect();
        let decisions: Vec<Option<Result<Decision>>> = agents
            .par_iter_mut()
            .zip(views)
            .map(|(agent, view)| {
                view.map(|(open, balance)| {
                    let obs = Observation {
                        time: now,
                        race,
                        state: &state,
                        history: &history,
                        grid: &grid,
                        open_bets: open,
                        balance,
                    };
                    agent.decide(&obs).map_err(Error::from)
                })
            })
            .collect();
        for (i, decision) in decisions.into_iter().enumerate() {
            let Some(decision) = decision else { continue };
            let decision = decision?;
            let bettor = agents[i].bettor_id;
            if config.sentiment_logging {
                let odds: Vec<Option<f64>> = decision
                    .prediction
                    .probs()
                    .iter()
                    .map(|&p| (p > 0.0).then(|| 1.0 / p))
                    .collect();
                for (c, o) in odds.iter().enumerate() {
                    sentiment.push(SentimentRow {
                        time: now,
                        bettor_id: bettor.0,
                        competitor_id: ids[c],
                        decimal_odds: o.unwrap_or(f64::INFINITY),
                    });
                }
                log.note(
                    now,
                    SessionNote::Sentiment {
                        bettor_id: bettor,
                        odds,
                    },
                );
            }
            for action in decision.actions {
                if let Err(reason) = apply(&mut book, bettor, &action, now) {
                    log.sync(&book);
                    log.note(
                        now,
                        SessionNote::Rejected {
                            bettor_id: bettor,
                            action,
                            reason,
                        },
                    );
                }
                log.sync(&book);
            }
        }
    }

    // rest of the race, then settlement
    while !state.is_finished() {
        if state.t >= race.tick_limit {
            return Err(crate::RaceError::TickLimit {
                limit: race.tick_limit,
            }
            .into());
        }
        state.advance(race, &mut race_rng)?;
        history.push(state.positions.clone());
        log.note(
            tick_time(state.t),
            SessionNote::RaceTick {
                tick: state.t,
                positions: state.positions.clone(),
            },
        );
    }
    let outcome = RaceOutcome::from_state(&state, race);
    let settlement = book.settle(
        ids[outcome.winner()],
        config.commission_rate,
        tick_time(state.t),
    )?;
    log.sync(&book);

    Ok(SessionResult {
        events: log.events,
        journal: book.journal().to_vec(),
        deposits,
        settlement,
        trajectory: Trajectory {
            competitor_ids: ids,
            dt: race.dt,
            snapshots: history,
            outcome,
        },
        sentiment,
        book,
    })
}

/// Runs a session on a dedicated pool of `workers` threads.
pub fn run_session_with_workers(config: &SessionConfig, workers: usize) -> Result<SessionResult> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Pool(e.to_string()))?;
    pool.install(|| run_session(config))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::Strategy;
    use crate::exchange::replay;
    use crate::race::{run_race, CompetitorSpec, StepDistribution};

    fn race(n: usize) -> RaceConfig {
        RaceConfig::new(
            2000.0,
            (0..n)
                .map(|i| CompetitorSpec::new(i as u32 + 1, StepDistribution::uniform(10.0, 20.0)))
                .collect(),
        )
    }

    fn mixed_agents() -> Vec<AgentParams> {
        let mut v: Vec<AgentParams> = [
            Strategy::Rp { d: 5 },
            Strategy::Lw,
            Strategy::Ud { gap: 20.0 },
            Strategy::Btf,
            Strategy::Linex { window: 10.0 },
            Strategy::Zi {
                odds_lo: 1.5,
                odds_hi: 20.0,
            },
            Strategy::Zi {
                odds_lo: 1.5,
                odds_hi: 20.0,
            },
            Strategy::Rb {
                gamma: 0.61,
                d: 5,
                stake_multiples: vec![1, 2, 5],
            },
        ]
        .into_iter()
        .map(AgentParams::new)
        .collect();
        for (i, a) in v.iter_mut().enumerate() {
            a.wake_jitter = 9.0;
            a.reevaluate_every = 5.0 + i as f64;
        }
        v
    }

    #[test]
    fn schedule_example() {
        let mut a = AgentParams::new(Strategy::Lw);
        a.wake_jitter = 7.0;
        let s = wake_schedule(std::slice::from_ref(&a), 3, 30.0 + 7.0);
        let j = agent_jitter(3, 0, 7.0);
        let times: Vec<f64> = s.iter().filter(|w| w.0 <= 30.0 + j).map(|w| w.0).collect();
        assert_eq!(times, vec![j, 10.0 + j, 20.0 + j, 30.0 + j]);
        assert!(wake_schedule(&[], 3, 100.0).is_empty());
        assert_eq!(
            wake_schedule(&mixed_agents(), 9, 200.0),
            wake_schedule(&mixed_agents(), 9, 200.0)
        );
    }

    #[test]
    fn schedule_ties_break_by_index() {
        let s: Vec<_> = WakeSchedule::new(vec![0.0, 0.0, 5.0], vec![10.0, 5.0, 10.0])
            .take(6)
            .collect();
        assert_eq!(
            s,
            vec![(0.0, 0), (0.0, 1), (5.0, 1), (5.0, 2), (10.0, 0), (10.0, 1)]
        );
    }

    #[test]
    fn no_agents_settles_empty_market() {
        let cfg = SessionConfig::new(race(3), vec![], 1);
        let r = run_session(&cfg).unwrap();
        assert!(r.settlement.rows.is_empty());
        assert_eq!(r.settlement.exchange_take, Money::ZERO);
        // race is the same one a plain run produces from the derived seed
        let plain = run_race(&cfg.race, derive_seed(1, "race", &[])).unwrap();
        assert_eq!(plain.snapshots, r.trajectory.snapshots);
    }

    #[test]
    fn opposite_views_trade() {
        let race = RaceConfig::new(
            2000.0,
            vec![
                CompetitorSpec::new(1, StepDistribution::uniform(10.0, 20.0)),
                CompetitorSpec::new(2, StepDistribution::uniform(10.0, 20.0)),
            ],
        );
        // a ZI population seeds both sides; value bettors take what suits them
        let mut agents = mixed_agents();
        agents.truncate(6);
        let cfg = SessionConfig::new(race, agents, 11);
        let r = run_session(&cfg).unwrap();
        assert!(!r.book.trades().is_empty());
        assert_eq!(
            r.settlement.net_sum() + r.settlement.exchange_take,
            Money::ZERO
        );
    }

    #[test]
    fn log_is_ordered_and_replays() {
        let mut cfg = SessionConfig::new(race(5), mixed_agents(), 42);
        cfg.sentiment_logging = true;
        let r = run_session(&cfg).unwrap();
        for (i, e) in r.events.iter().enumerate() {
            assert_eq!(e.seq, i as u64 + 1);
        }
        assert!(r.events.windows(2).all(|w| w[0].time <= w[1].time));
        let close = r
            .events
            .iter()
            .position(|e| matches!(e.payload, SessionPayload::Exchange(ExchangeEvent::Close)))
            .unwrap();
        assert!(r.events[close..].iter().all(|e| !matches!(
            e.payload,
            SessionPayload::Exchange(
                ExchangeEvent::Submit { .. }
                    | ExchangeEvent::Cancel { .. }
                    | ExchangeEvent::Match { .. }
            )
        )));
        let rebuilt = replay(
            r.book.competitor_ids().to_vec(),
            &r.deposits,
            &r.journal,
            |b| b.check_invariants(),
        )
        .unwrap();
        assert_eq!(rebuilt, r.book);
        assert!(!r.sentiment.is_empty());
        assert!(r.trajectory.outcome.ticks < 360);

        let text: Vec<String> = r
            .events
            .iter()
            .map(|e| serde_json::to_string(e).unwrap())
            .collect();
        let back: Vec<SessionEvent> = text
            .iter()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect();
        assert_eq!(back, r.events);
    }

    #[test]
    fn same_seed_same_log_any_pool() {
        let cfg = SessionConfig::new(race(4), mixed_agents(), 5);
        let a = run_session_with_workers(&cfg, 1).unwrap();
        let b = run_session_with_workers(&cfg, 3).unwrap();
        assert_eq!(a.events, b.events);
        assert_eq!(a.sentiment, b.sentiment);
    }

    #[test]
    fn rejects_bad_config() {
        let mut cfg = SessionConfig::new(race(2), mixed_agents(), 0);
        cfg.agents[2].reevaluate_every = 0.0;
        assert_eq!(
            cfg.validate().unwrap_err().key,
            "agents[2].reevaluate_every"
        );
        cfg.agents[2].reevaluate_every = 1.0;
        cfg.opening_period = -1.0;
        assert_eq!(cfg.validate().unwrap_err().key, "exchange.opening_period");
    }
}
