//! Bettor agents. Each strategy turns an observation of the race and the
//! market into a [`Prediction`]; a shared value-betting policy turns the
//! prediction into orders.

mod predict;

pub use predict::{
    btf_predict, linex_predict, linex_time_to_finish, lw_predict, random_odds, rb_distort,
    rb_stake, rb_weight, rp_predict, stake_set, step_history, ud_predict, Prediction,
};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ConfigError, RaceError};
use crate::exchange::{
    liability_ceil, quantize_odds, BetId, BettorId, MarketGrid, Money, Odds, Side,
};
use crate::race::{RaceConfig, RaceState};
use crate::seed::StreamRng;

fn default_gamma() -> f64 {
    0.61
}

fn default_rb_dry_runs() -> u32 {
    5
}

fn default_mantissas() -> Vec<u64> {
    vec![1, 2, 5]
}

fn default_zi_lo() -> f64 {
    1.5
}

fn default_zi_hi() -> f64 {
    20.0
}

/// Which predictor an agent uses, with its strategy-specific parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Strategy {
    /// Dry-run predictor with `d` simulations per evaluation.
    Rp { d: u32 },
    /// Linear extrapolation over the last `window` seconds.
    Linex { window: f64 },
    /// Leader wins.
    Lw,
    /// Underdog: second place while within `gap` of the leader.
    Ud { gap: f64 },
    /// Back the market favourite.
    Btf,
    /// Representative bettor: distorted dry-run prediction, clustered stakes.
    Rb {
        #[serde(default = "default_gamma")]
        gamma: f64,
        #[serde(default = "default_rb_dry_runs")]
        d: u32,
        #[serde(default = "default_mantissas")]
        stake_multiples: Vec<u64>,
    },
    /// Zero intelligence: random competitor, side, odds and stake.
    Zi {
        #[serde(default = "default_zi_lo")]
        odds_lo: f64,
        #[serde(default = "default_zi_hi")]
        odds_hi: f64,
    },
}

impl Strategy {
    pub fn tag(&self) -> &'static str {
        match self {
            Strategy::Rp { .. } => "rp",
            Strategy::Linex { .. } => "linex",
            Strategy::Lw => "lw",
            Strategy::Ud { .. } => "ud",
            Strategy::Btf => "btf",
            Strategy::Rb { .. } => "rb",
            Strategy::Zi { .. } => "zi",
        }
    }
}

fn default_reevaluate() -> f64 {
    10.0
}

fn default_max_stake() -> Money {
    Money(1000)
}

fn default_base_stake() -> Money {
    Money(200)
}

fn default_balance() -> Money {
    Money(100_000)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentParams {
    pub strategy: Strategy,
    /// Seconds between evaluations.
    #[serde(default = "default_reevaluate")]
    pub reevaluate_every: f64,
    /// Upper bound of the agent's fixed wake offset, in seconds.
    #[serde(default)]
    pub wake_jitter: f64,
    #[serde(default = "default_max_stake")]
    pub max_stake: Money,
    #[serde(default = "default_base_stake")]
    pub base_stake: Money,
    #[serde(default = "default_balance")]
    pub initial_balance: Money,
}

impl AgentParams {
    pub fn new(strategy: Strategy) -> Self {
        Self {
            strategy,
            reevaluate_every: default_reevaluate(),
            wake_jitter: 0.0,
            max_stake: default_max_stake(),
            base_stake: default_base_stake(),
            initial_balance: default_balance(),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        match &self.strategy {
            Strategy::Linex { window } if !(window.is_finite() && *window >= 1.0) => {
                return Err(ConfigError::new("strategy.window", "must be >= 1"));
            }
            Strategy::Ud { gap } if !(gap.is_finite() && *gap > 0.0) => {
                return Err(ConfigError::new("strategy.gap", "must be > 0"));
            }
            Strategy::Rb {
                gamma,
                stake_multiples,
                ..
            } => {
                if !(*gamma > 0.0 && *gamma <= 1.0) {
                    return Err(ConfigError::new("strategy.gamma", "must lie in (0, 1]"));
                }
                if stake_multiples.is_empty() || stake_multiples.contains(&0) {
                    return Err(ConfigError::new(
                        "strategy.stake_multiples",
                        "must be non-empty and positive",
                    ));
                }
            }
            Strategy::Zi { odds_lo, odds_hi } => {
                if !(*odds_lo > 1.0 && odds_lo <= odds_hi) {
                    return Err(ConfigError::new(
                        "strategy.odds_lo",
                        "need 1 < odds_lo <= odds_hi",
                    ));
                }
            }
            _ => {}
        }
        if !(self.reevaluate_every.is_finite() && self.reevaluate_every > 0.0) {
            return Err(ConfigError::new("reevaluate_every", "must be > 0"));
        }
        if !(self.wake_jitter.is_finite() && self.wake_jitter >= 0.0) {
            return Err(ConfigError::new("wake_jitter", "must be >= 0"));
        }
        if !self.max_stake.is_positive() {
            return Err(ConfigError::new("max_stake", "must be > 0"));
        }
        if !self.base_stake.is_positive() {
            return Err(ConfigError::new("base_stake", "must be > 0"));
        }
        if self.initial_balance.0 < 0 {
            return Err(ConfigError::new("initial_balance", "must be >= 0"));
        }
        Ok(())
    }
}

/// An unmatched remainder the agent still has in the book.
#[derive(Clone, Debug, PartialEq)]
pub struct OpenBet {
    pub bet_id: BetId,
    pub competitor: usize,
    pub side: Side,
    pub odds: Odds,
    pub unmatched: Money,
    pub arrival_time: f64,
}

/// What an agent sees when it wakes.
#[derive(Clone, Debug)]
pub struct Observation<'a> {
    pub time: f64,
    pub race: &'a RaceConfig,
    pub state: &'a RaceState,
    /// Public position snapshots, one per completed tick, starting at tick 0.
    pub history: &'a [Vec<f64>],
    pub grid: &'a MarketGrid,
    pub open_bets: Vec<OpenBet>,
    /// Free balance.
    pub balance: Money,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum OrderAction {
    Place {
        competitor: usize,
        side: Side,
        odds: Odds,
        stake: Money,
    },
    Cancel {
        bet_id: BetId,
    },
}

/// A wake-up's output: the prediction behind it and the orders.
#[derive(Clone, Debug, PartialEq)]
pub struct Decision {
    pub prediction: Prediction,
    pub actions: Vec<OrderAction>,
}

/// Largest stake whose reservation fits in `free`, capped at `wanted`.
fn affordable_stake(side: Side, odds: Odds, wanted: Money, free: Money) -> Money {
    match side {
        Side::Back => wanted.min(free),
        Side::Lay => {
            if liability_ceil(wanted, odds) <= free {
                return wanted;
            }
            let per = odds.hundredths() as i64 - 100;
            // ceil(s * per / 100) <= free  <=>  s * per <= free * 100
            Money((free.0 * 100 / per).min(wanted.0))
        }
    }
}

fn fair_tick(prob: f64) -> Odds {
    quantize_odds((1.0 / prob).max(1.01)).expect("clamped above 1")
}

/// Value-betting policy shared by every predictive strategy.
///
/// Takes the best-edge aggressive order available: back where the best
/// resting lay odds reach the quantized fair odds, lay where the best
/// resting back odds are at or below them. Without one, posts a back on the
/// favourite at its fair odds.
pub fn value_orders(
    prediction: &Prediction,
    grid: &MarketGrid,
    stake: Money,
    free: Money,
    open: &[OpenBet],
) -> Vec<OrderAction> {
    let mut best: Option<(f64, OrderAction)> = None;
    for (c, g) in grid.iter().enumerate() {
        let p = prediction.probs()[c];
        let fair = (p > 0.0).then(|| fair_tick(p));
        if let (Some(level), Some(fair)) = (g.best_lay(), fair) {
            if level.odds >= fair {
                let edge = p * level.odds.decimal() - 1.0;
                if best.as_ref().is_none_or(|(e, _)| edge > *e) {
                    best = Some((
                        edge,
                        OrderAction::Place {
                            competitor: c,
                            side: Side::Back,
                            odds: level.odds,
                            stake,
                        },
                    ));
                }
            }
        }
        if let Some(level) = g.best_back() {
            if fair.is_none_or(|f| level.odds <= f) {
                let edge = 1.0 - p * level.odds.decimal();
                if best.as_ref().is_none_or(|(e, _)| edge > *e) {
                    best = Some((
                        edge,
                        OrderAction::Place {
                            competitor: c,
                            side: Side::Lay,
                            odds: level.odds,
                            stake,
                        },
                    ));
                }
            }
        }
    }
    let action = match best {
        Some((_, a)) => a,
        None => {
            let fav = prediction.favourite();
            let odds = fair_tick(prediction.probs()[fav]);
            if open
                .iter()
                .any(|b| b.competitor == fav && b.side == Side::Back && b.odds == odds)
            {
                return Vec::new();
            }
            OrderAction::Place {
                competitor: fav,
                side: Side::Back,
                odds,
                stake,
            }
        }
    };
    fit_to_budget(vec![action], free)
}

/// Shrinks or drops placements so their combined reservations fit in `free`.
pub fn fit_to_budget(actions: Vec<OrderAction>, mut free: Money) -> Vec<OrderAction> {
    let mut out = Vec::with_capacity(actions.len());
    for a in actions {
        match a {
            OrderAction::Place {
                competitor,
                side,
                odds,
                stake,
            } => {
                let s = affordable_stake(side, odds, stake, free);
                if s.is_positive() {
                    free -= crate::exchange::MarketBook::reservation_for(side, odds, s);
                    out.push(OrderAction::Place {
                        competitor,
                        side,
                        odds,
                        stake: s,
                    });
                }
            }
            cancel => out.push(cancel),
        }
    }
    out
}

/// Zero-intelligence orders: uniform competitor and side, odds uniform over
/// the ladder ticks in `[odds_lo, odds_hi]`, stake uniform in `[1, max_stake]`.
pub fn zi_decide<R: Rng + ?Sized>(
    n: usize,
    odds_lo: f64,
    odds_hi: f64,
    max_stake: Money,
    rng: &mut R,
) -> (usize, OrderAction) {
    let competitor = rng.random_range(0..n);
    let side = if rng.random::<bool>() {
        Side::Back
    } else {
        Side::Lay
    };
    let lo = quantize_odds(odds_lo).unwrap_or(Odds::MIN);
    let hi = quantize_odds(odds_hi).unwrap_or(Odds::MIN).max(lo);
    let odds = random_odds(lo, hi, rng);
    let stake = Money(rng.random_range(1..=max_stake.0.max(1)));
    (
        competitor,
        OrderAction::Place {
            competitor,
            side,
            odds,
            stake,
        },
    )
}

/// Prediction of the agent's strategy for this observation.
pub fn predict<R: Rng + ?Sized>(
    params: &AgentParams,
    obs: &Observation<'_>,
    rng: &mut R,
) -> Result<Prediction, RaceError> {
    let n = obs.race.n_competitors();
    let positions = &obs.state.positions;
    Ok(match &params.strategy {
        Strategy::Rp { d } => rp_predict(obs.state, obs.race, *d, rng)?,
        Strategy::Linex { window } => {
            let ticks = ((window / obs.race.dt).round() as usize).max(1);
            linex_predict(
                &step_history(obs.history),
                positions,
                obs.race.track_length,
                ticks,
            )
        }
        Strategy::Lw => lw_predict(positions),
        Strategy::Ud { gap } => ud_predict(positions, *gap),
        Strategy::Btf => btf_predict(obs.grid),
        Strategy::Rb { gamma, d, .. } => {
            rb_distort(&rp_predict(obs.state, obs.race, *d, rng)?, *gamma)
        }
        Strategy::Zi { .. } => Prediction::uniform(n),
    })
}

/// One wake-up: cancel stale bets, predict, and place orders.
pub fn decide<R: Rng + ?Sized>(
    params: &AgentParams,
    obs: &Observation<'_>,
    rng: &mut R,
) -> Result<Decision, RaceError> {
    let mut actions: Vec<OrderAction> = obs
        .open_bets
        .iter()
        .filter(|b| obs.time - b.arrival_time >= params.reevaluate_every)
        .map(|b| OrderAction::Cancel { bet_id: b.bet_id })
        .collect();
    let n = obs.race.n_competitors();
    let (prediction, placements) = match &params.strategy {
        Strategy::Zi { odds_lo, odds_hi } => {
            let (c, action) = zi_decide(n, *odds_lo, *odds_hi, params.max_stake, rng);
            (Prediction::point(&[c], n), vec![action])
        }
        strategy => {
            let prediction = predict(params, obs, rng)?;
            let stake = match strategy {
                Strategy::Rb {
                    stake_multiples, ..
                } => {
                    let raw = Money(rng.random_range(1..=params.max_stake.0));
                    rb_stake(raw, stake_multiples, params.max_stake)
                }
                _ => params.base_stake.min(params.max_stake),
            };
            let orders = value_orders(&prediction, obs.grid, stake, obs.balance, &obs.open_bets);
            (prediction, orders)
        }
    };
    actions.extend(fit_to_budget(placements, obs.balance));
    Ok(Decision {
        prediction,
        actions,
    })
}

/// A bettor with its own random stream and wake offset.
#[derive(Clone, Debug)]
pub struct Agent {
    pub bettor_id: BettorId,
    pub params: AgentParams,
    pub rng: StreamRng,
    /// Fixed offset added to every periodic wake time.
    pub jitter: f64,
}

impl Agent {
    pub fn decide(&mut self, obs: &Observation<'_>) -> Result<Decision, RaceError> {
        decide(&self.params, obs, &mut self.rng)
    }
}
