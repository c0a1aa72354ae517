//! Outcome predictors for each bettor strategy.

use rand::{Rng, RngCore};
use rayon::prelude::*;

use crate::error::RaceError;
use crate::exchange::{MarketGrid, Money, Odds};
use crate::race::{simulate_from, RaceConfig, RaceState};

/// Win-probability vector over competitors (by index). Entries are in
/// `[0, 1]` and sum to one.
#[derive(Clone, Debug, PartialEq)]
pub struct Prediction(Vec<f64>);

impl Prediction {
    pub fn uniform(n: usize) -> Self {
        Prediction(vec![1.0 / n as f64; n])
    }

    /// Unit mass split equally over `winners`.
    pub fn point(winners: &[usize], n: usize) -> Self {
        if winners.is_empty() {
            return Self::uniform(n);
        }
        let mut p = vec![0.0; n];
        let share = 1.0 / winners.len() as f64;
        for &w in winners {
            p[w] = share;
        }
        Prediction(p)
    }

    /// Normalizes non-negative weights; all-zero weights give the uniform vector.
    pub fn from_weights(weights: Vec<f64>) -> Self {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Self::uniform(weights.len());
        }
        Prediction(weights.into_iter().map(|w| w / total).collect())
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `1 / p`, infinite for zero probability.
    pub fn fair_odds(&self, c: usize) -> f64 {
        1.0 / self.0[c]
    }

    /// Most likely competitor; lowest index on ties.
    pub fn favourite(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.0.iter().enumerate() {
            if p > self.0[best] {
                best = i;
            }
        }
        best
    }
}

/// Indices attaining the minimum of `values` (exact comparison).
fn argmin_all(values: &[f64]) -> Vec<usize> {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    if min.is_infinite() && values.iter().all(|v| v.is_infinite()) {
        return (0..values.len()).collect();
    }
    (0..values.len()).filter(|&i| values[i] == min).collect()
}

fn argmax_all(values: &[f64]) -> Vec<usize> {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (0..values.len()).filter(|&i| values[i] == max).collect()
}

/// Dry-run predictor: `d` forward simulations from `state`, with add-one
/// smoothing, `p_c = (wins_c + 1) / (d + n)`.
pub fn rp_predict<R: RngCore + ?Sized>(
    state: &RaceState,
    config: &RaceConfig,
    d: u32,
    rng: &mut R,
) -> Result<Prediction, RaceError> {
    let n = config.n_competitors();
    let seeds: Vec<u64> = (0..d).map(|_| rng.next_u64()).collect();
    let winners: Vec<usize> = seeds
        .par_iter()
        .map(|&s| simulate_from(state, config, s).map(|order| order[0]))
        .collect::<Result<_, _>>()?;
    let mut wins = vec![0u32; n];
    for w in winners {
        wins[w] += 1;
    }
    let denom = (d as usize + n) as f64;
    Ok(Prediction(
        wins.iter().map(|&w| (w as f64 + 1.0) / denom).collect(),
    ))
}

/// Step sizes per competitor from consecutive position snapshots.
pub fn step_history(snapshots: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = snapshots.first().map_or(0, Vec::len);
    (0..n)
        .map(|c| snapshots.windows(2).map(|w| w[1][c] - w[0][c]).collect())
        .collect()
}

/// Ticks until `position` reaches the line at the mean of `recent_steps`.
pub fn linex_time_to_finish(recent_steps: &[f64], position: f64, track_length: f64) -> f64 {
    let remaining = track_length - position;
    if remaining <= 0.0 {
        return 0.0;
    }
    if recent_steps.is_empty() {
        return f64::INFINITY;
    }
    let speed = recent_steps.iter().sum::<f64>() / recent_steps.len() as f64;
    if speed > 0.0 {
        remaining / speed
    } else {
        f64::INFINITY
    }
}

/// Linear extrapolation: each competitor keeps its mean speed over the last
/// `window` steps; the earliest projected finisher gets all the mass.
pub fn linex_predict(
    steps: &[Vec<f64>],
    positions: &[f64],
    track_length: f64,
    window: usize,
) -> Prediction {
    let times: Vec<f64> = steps
        .iter()
        .zip(positions)
        .map(|(s, &pos)| {
            let w = window.max(1).min(s.len());
            linex_time_to_finish(&s[s.len() - w..], pos, track_length)
        })
        .collect();
    Prediction::point(&argmin_all(&times), positions.len())
}

/// The current leader wins.
pub fn lw_predict(positions: &[f64]) -> Prediction {
    Prediction::point(&argmax_all(positions), positions.len())
}

/// Backs second place while it trails the leader by less than `gap`.
pub fn ud_predict(positions: &[f64], gap: f64) -> Prediction {
    let n = positions.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| positions[b].total_cmp(&positions[a]).then(a.cmp(&b)));
    if n < 2 {
        return Prediction::point(&order, n);
    }
    let (leader, second) = (order[0], order[1]);
    let pick = if positions[leader] - positions[second] < gap {
        second
    } else {
        leader
    };
    Prediction::point(&[pick], n)
}

/// The market favourite: lowest best resting back odds. Competitors without
/// resting backs are ignored; an empty market gives the uniform vector.
pub fn btf_predict(grid: &MarketGrid) -> Prediction {
    let n = grid.len();
    let best: Vec<f64> = grid
        .iter()
        .map(|g| g.best_back().map_or(f64::INFINITY, |l| l.odds.decimal()))
        .collect();
    if best.iter().all(|b| b.is_infinite()) {
        return Prediction::uniform(n);
    }
    Prediction::point(&argmin_all(&best), n)
}

/// Probability weighting `p^g / (p^g + (1-p)^g)^(1/g)`. Strictly increasing
/// in `p` only for `g` above about 0.2792; smaller values bend the curve back
/// down near the middle.
pub fn rb_weight(p: f64, gamma: f64) -> f64 {
    if p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return 1.0;
    }
    let a = p.powf(gamma);
    let b = (1.0 - p).powf(gamma);
    a / (a + b).powf(1.0 / gamma)
}

/// Applies [`rb_weight`] to every entry and renormalizes.
pub fn rb_distort(base: &Prediction, gamma: f64) -> Prediction {
    Prediction::from_weights(base.probs().iter().map(|&p| rb_weight(p, gamma)).collect())
}

/// Clustered stake values `m * 10^k` for each mantissa, up to `max`.
pub fn stake_set(mantissas: &[u64], max: i64) -> Vec<i64> {
    let mut set = Vec::new();
    let mut scale: i64 = 1;
    while scale <= max.max(1) {
        for &m in mantissas {
            let v = (m as i64).saturating_mul(scale);
            if v >= 1 && v <= max {
                set.push(v);
            }
        }
        scale = match scale.checked_mul(10) {
            Some(s) => s,
            None => break,
        };
    }
    set.sort_unstable();
    set.dedup();
    set
}

/// Snaps `raw` to the nearest clustered stake not above `max`; ties go to
/// the smaller value.
pub fn rb_stake(raw: Money, mantissas: &[u64], max: Money) -> Money {
    let set = stake_set(mantissas, max.0);
    let Some(&first) = set.first() else {
        return max.min(raw);
    };
    let mut best = first;
    for &v in &set {
        if (v - raw.0).abs() < (best - raw.0).abs() {
            best = v;
        }
    }
    Money(best)
}

/// A uniformly random ladder tick within `[lo, hi]`.
pub fn random_odds<R: Rng + ?Sized>(lo: Odds, hi: Odds, rng: &mut R) -> Odds {
    let t = rng.random_range(lo.tick()..=hi.tick());
    Odds::from_tick(t).expect("tick within ladder")
}
