//! Discrete-time track race on a one-dimensional course.
//!
//! Each tick every unfinished competitor `c` moves forward by
//!
//! ```text
//! S_c = R_c(d_c) * P_c * draw(c)                 if no one is within theta_c ahead
//! S_c = R_c(d_c) * min(prev_c, prev_front)       otherwise
//! ```
//!
//! where `front` is the nearest unfinished competitor strictly ahead of `c`
//! and `prev_*` are the steps taken on the previous tick. All competitors step from the
//! positions at the start of the tick. A draw is consumed for every unfinished
//! competitor on every tick, blocked or not, so the random stream stays
//! aligned across parameter changes.

mod step;

pub use step::{
    preference_factor, responsiveness, ResponsivenessParams, StepDistribution, PREFERENCE_FLOOR,
};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ConfigError, RaceError};
use crate::seed::{stream, StreamRng};

pub const DEFAULT_TICK_LIMIT: u64 = 1_000_000;

/// When in-play betting stops.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BettingClose {
    OnFirstFinish,
    OnKthFinish {
        k: usize,
    },
    #[default]
    OnLastFinish,
}

impl BettingClose {
    /// Number of finishers that triggers the close in a race of `n` competitors.
    pub fn finishers_required(&self, n: usize) -> usize {
        match *self {
            BettingClose::OnFirstFinish => 1,
            BettingClose::OnKthFinish { k } => k,
            BettingClose::OnLastFinish => n,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompetitorSpec {
    pub id: u32,
    pub step_dist: StepDistribution,
    #[serde(default)]
    pub pref: f64,
    #[serde(default)]
    pub pref_sensitivity: f64,
    #[serde(default)]
    pub resp: ResponsivenessParams,
    #[serde(default)]
    pub theta: f64,
}

impl CompetitorSpec {
    pub fn new(id: u32, step_dist: StepDistribution) -> Self {
        Self {
            id,
            step_dist,
            pref: 0.0,
            pref_sensitivity: 0.0,
            resp: ResponsivenessParams::default(),
            theta: 0.0,
        }
    }

    pub fn with_theta(mut self, theta: f64) -> Self {
        self.theta = theta;
        self
    }

    fn validate(&self) -> Result<(), ConfigError> {
        self.step_dist
            .validate()
            .map_err(|e| e.within("step_dist"))?;
        if !(self.pref.is_finite()) {
            return Err(ConfigError::new("pref", "must be finite"));
        }
        if !(self.pref_sensitivity.is_finite() && self.pref_sensitivity >= 0.0) {
            return Err(ConfigError::new("pref_sensitivity", "must be >= 0"));
        }
        self.resp.validate().map_err(|e| e.within("resp"))?;
        if !(self.theta.is_finite() && self.theta >= 0.0) {
            return Err(ConfigError::new("theta", "must be >= 0"));
        }
        Ok(())
    }
}

fn default_dt() -> f64 {
    1.0
}

fn default_tick_limit() -> u64 {
    DEFAULT_TICK_LIMIT
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RaceConfig {
    pub track_length: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default)]
    pub race_factor: f64,
    #[serde(default)]
    pub betting_close: BettingClose,
    pub competitors: Vec<CompetitorSpec>,
    #[serde(default = "default_tick_limit")]
    pub tick_limit: u64,
}

impl RaceConfig {
    pub fn new(track_length: f64, competitors: Vec<CompetitorSpec>) -> Self {
        Self {
            track_length,
            dt: 1.0,
            race_factor: 0.0,
            betting_close: BettingClose::default(),
            competitors,
            tick_limit: DEFAULT_TICK_LIMIT,
        }
    }

    pub fn n_competitors(&self) -> usize {
        self.competitors.len()
    }

    pub fn competitor_ids(&self) -> Vec<u32> {
        self.competitors.iter().map(|c| c.id).collect()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let n = self.competitors.len();
        if n == 0 {
            return Err(ConfigError::new(
                "competitors",
                "at least one competitor is required",
            ));
        }
        if !(self.track_length.is_finite() && self.track_length > 0.0) {
            return Err(ConfigError::new("track_length", "must be > 0"));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(ConfigError::new("dt", "must be > 0"));
        }
        if !self.race_factor.is_finite() {
            return Err(ConfigError::new("race_factor", "must be finite"));
        }
        if let BettingClose::OnKthFinish { k } = self.betting_close {
            if k == 0 || k > n {
                return Err(ConfigError::new(
                    "betting_close.k",
                    format!("must lie in 1..={n} (got {k})"),
                ));
            }
        }
        if self.tick_limit == 0 {
            return Err(ConfigError::new("tick_limit", "must be >= 1"));
        }
        let mut ids = std::collections::BTreeSet::new();
        for (i, c) in self.competitors.iter().enumerate() {
            c.validate()
                .map_err(|e| e.within(&format!("competitors[{i}]")))?;
            if !ids.insert(c.id) {
                return Err(ConfigError::new(
                    format!("competitors[{i}].id"),
                    format!("duplicate id {}", c.id),
                ));
            }
        }
        Ok(())
    }

    /// The unconstrained step for competitor `c` at `position` given a raw draw.
    fn free_step(&self, c: usize, position: f64, draw: f64) -> f64 {
        let spec = &self.competitors[c];
        responsiveness(position, &spec.resp, self.track_length)
            * preference_factor(self.race_factor, spec.pref, spec.pref_sensitivity)
            * draw
    }
}

/// Mutable state of a race in progress.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RaceState {
    pub t: u64,
    pub positions: Vec<f64>,
    pub prev_steps: Vec<f64>,
    pub finished: Vec<Option<u64>>,
    /// Interpolated crossing time in seconds, set together with `finished`.
    pub finish_times: Vec<Option<f64>>,
    /// Number of steps taken through the blocked branch so far.
    pub blocked_steps: u64,
}

impl RaceState {
    /// Tick-0 state. `prev_steps` are seeded with one unblocked step each.
    pub fn start<R: Rng + ?Sized>(config: &RaceConfig, rng: &mut R) -> Self {
        let n = config.n_competitors();
        let prev_steps = (0..n)
            .map(|c| config.free_step(c, 0.0, config.competitors[c].step_dist.draw(rng)))
            .collect();
        Self {
            t: 0,
            positions: vec![0.0; n],
            prev_steps,
            finished: vec![None; n],
            finish_times: vec![None; n],
            blocked_steps: 0,
        }
    }

    /// A scripted mid-race state with nobody finished yet unless already past
    /// the line. Competitors at or beyond `track_length` are marked finished
    /// at tick `t` with an exact crossing time.
    pub fn scripted(
        config: &RaceConfig,
        t: u64,
        positions: Vec<f64>,
        prev_steps: Vec<f64>,
    ) -> Result<Self, RaceError> {
        let n = config.n_competitors();
        if positions.len() != n || prev_steps.len() != n {
            return Err(RaceError::StateMismatch(format!(
                "expected {n} positions and steps, got {} and {}",
                positions.len(),
                prev_steps.len()
            )));
        }
        if prev_steps.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(RaceError::StateMismatch(
                "previous steps must be > 0".into(),
            ));
        }
        let finished: Vec<Option<u64>> = positions
            .iter()
            .map(|&p| (p >= config.track_length).then_some(t))
            .collect();
        let finish_times = finished
            .iter()
            .map(|f| f.map(|tick| tick as f64 * config.dt))
            .collect();
        Ok(Self {
            t,
            positions,
            prev_steps,
            finished,
            finish_times,
            blocked_steps: 0,
        })
    }

    pub fn n_finished(&self) -> usize {
        self.finished.iter().filter(|f| f.is_some()).count()
    }

    pub fn is_finished(&self) -> bool {
        self.finished.iter().all(Option::is_some)
    }

    /// Finished competitors ordered by finish tick, then by greater overshoot
    /// past the line, then by index.
    pub fn finish_order(&self, track_length: f64) -> Vec<usize> {
        let mut done: Vec<usize> = (0..self.positions.len())
            .filter(|&c| self.finished[c].is_some())
            .collect();
        done.sort_by(|&a, &b| {
            self.finished[a]
                .cmp(&self.finished[b])
                .then_with(|| {
                    let oa = self.positions[a] - track_length;
                    let ob = self.positions[b] - track_length;
                    ob.total_cmp(&oa)
                })
                .then_with(|| a.cmp(&b))
        });
        done
    }

    /// Advances every unfinished competitor by one tick.
    pub fn advance<R: Rng + ?Sized>(
        &mut self,
        config: &RaceConfig,
        rng: &mut R,
    ) -> Result<(), RaceError> {
        if self.is_finished() {
            return Err(RaceError::AlreadyFinished);
        }
        let n = self.positions.len();
        let mut steps = vec![0.0; n];
        for c in 0..n {
            if self.finished[c].is_some() {
                continue;
            }
            let draw = config.competitors[c].step_dist.draw(rng);
            let outcome = step_with_draw(c, self, config, draw);
            if outcome.blocked {
                self.blocked_steps += 1;
            }
            steps[c] = outcome.step;
        }
        let next_t = self.t + 1;
        for c in 0..n {
            if self.finished[c].is_some() {
                continue;
            }
            let before = self.positions[c];
            let step = steps[c];
            self.positions[c] = before + step;
            self.prev_steps[c] = step;
            if self.positions[c] >= config.track_length {
                self.finished[c] = Some(next_t);
                let frac = ((config.track_length - before) / step).clamp(0.0, 1.0);
                self.finish_times[c] = Some((self.t as f64 + frac) * config.dt);
            }
        }
        self.t = next_t;
        Ok(())
    }
}

/// Result of one competitor's step computation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepOutcome {
    pub step: f64,
    pub blocked: bool,
    pub front: Option<usize>,
}

/// Nearest competitor strictly ahead of `c`. Equal positions do not count as
/// ahead; equal gaps resolve to the lower index.
pub fn front_competitor(c: usize, positions: &[f64]) -> Option<usize> {
    front_among(c, positions, |_| true)
}

/// As [`front_competitor`], considering only competitors for which `on_track`
/// holds.
fn front_among(c: usize, positions: &[f64], on_track: impl Fn(usize) -> bool) -> Option<usize> {
    let here = positions[c];
    let mut best: Option<(usize, f64)> = None;
    for (i, &p) in positions.iter().enumerate() {
        if i == c || p <= here || !on_track(i) {
            continue;
        }
        let gap = p - here;
        if best.is_none_or(|(_, g)| gap < g) {
            best = Some((i, gap));
        }
    }
    best.map(|(i, _)| i)
}

/// Step for competitor `c` given its raw draw from the step distribution.
/// Competitors already past the line have left the track and block nobody;
/// otherwise a runner stuck behind one with a multiplier below 1 would take
/// ever-shrinking steps and might never finish.
pub fn step_with_draw(c: usize, state: &RaceState, config: &RaceConfig, draw: f64) -> StepOutcome {
    let spec = &config.competitors[c];
    let position = state.positions[c];
    let front = front_among(c, &state.positions, |i| state.finished[i].is_none());
    let blocked = match front {
        Some(i) => state.positions[i] - position <= spec.theta,
        None => false,
    };
    let step = if let (true, Some(i)) = (blocked, front) {
        responsiveness(position, &spec.resp, config.track_length)
            * state.prev_steps[c].min(state.prev_steps[i])
    } else {
        config.free_step(c, position, draw)
    };
    StepOutcome {
        step,
        blocked,
        front,
    }
}

/// Step for competitor `c`, drawing from `rng`.
pub fn step_competitor<R: Rng + ?Sized>(
    c: usize,
    state: &RaceState,
    config: &RaceConfig,
    rng: &mut R,
) -> f64 {
    let draw = config.competitors[c].step_dist.draw(rng);
    step_with_draw(c, state, config, draw).step
}

/// Positions after each tick of one race, plus its result.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub competitor_ids: Vec<u32>,
    pub dt: f64,
    /// `snapshots[k]` holds positions after tick `k`; `snapshots[0]` is the start.
    pub snapshots: Vec<Vec<f64>>,
    pub outcome: RaceOutcome,
}

/// Result of a race without the per-tick positions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RaceOutcome {
    /// Competitor indices, winner first.
    pub finish_order: Vec<usize>,
    pub finish_ticks: Vec<u64>,
    pub finish_times: Vec<f64>,
    pub ticks: u64,
    pub blocked_steps: u64,
}

impl RaceOutcome {
    pub(crate) fn from_state(state: &RaceState, config: &RaceConfig) -> Self {
        Self {
            finish_order: state.finish_order(config.track_length),
            finish_ticks: state
                .finished
                .iter()
                .map(|f| f.unwrap_or(state.t))
                .collect(),
            finish_times: state
                .finish_times
                .iter()
                .map(|f| f.unwrap_or(f64::NAN))
                .collect(),
            ticks: state.t,
            blocked_steps: state.blocked_steps,
        }
    }

    pub fn winner(&self) -> usize {
        self.finish_order[0]
    }

    /// 1-based finish rank of each competitor index.
    pub fn ranks(&self) -> Vec<usize> {
        let mut ranks = vec![0; self.finish_order.len()];
        for (r, &c) in self.finish_order.iter().enumerate() {
            ranks[c] = r + 1;
        }
        ranks
    }
}

fn run_to_end(
    state: &mut RaceState,
    config: &RaceConfig,
    rng: &mut StreamRng,
    mut record: Option<&mut Vec<Vec<f64>>>,
) -> Result<(), RaceError> {
    while !state.is_finished() {
        if state.t >= config.tick_limit {
            return Err(RaceError::TickLimit {
                limit: config.tick_limit,
            });
        }
        state.advance(config, rng)?;
        if let Some(rec) = record.as_deref_mut() {
            rec.push(state.positions.clone());
        }
    }
    Ok(())
}

/// Simulates a full race and records every tick.
pub fn run_race(config: &RaceConfig, seed: u64) -> Result<Trajectory, RaceError> {
    config.validate()?;
    let mut rng = stream(seed);
    let mut state = RaceState::start(config, &mut rng);
    let mut snapshots = vec![state.positions.clone()];
    run_to_end(&mut state, config, &mut rng, Some(&mut snapshots))?;
    Ok(Trajectory {
        competitor_ids: config.competitor_ids(),
        dt: config.dt,
        snapshots,
        outcome: RaceOutcome::from_state(&state, config),
    })
}

/// Same race as [`run_race`] for the same seed, without the snapshots.
pub fn run_race_outcome(config: &RaceConfig, seed: u64) -> Result<RaceOutcome, RaceError> {
    let mut rng = stream(seed);
    let mut state = RaceState::start(config, &mut rng);
    run_to_end(&mut state, config, &mut rng, None)?;
    Ok(RaceOutcome::from_state(&state, config))
}

/// Forward-simulates from `state` to completion on a private copy and
/// returns the finish order.
pub fn simulate_from(
    state: &RaceState,
    config: &RaceConfig,
    seed: u64,
) -> Result<Vec<usize>, RaceError> {
    if state.positions.len() != config.n_competitors() {
        return Err(RaceError::StateMismatch(
            "competitor count differs from config".into(),
        ));
    }
    let mut rng = stream(seed);
    let mut sim = state.clone();
    run_to_end(&mut sim, config, &mut rng, None)?;
    Ok(sim.finish_order(config.track_length))
}
