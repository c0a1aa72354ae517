use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::StatsError;

/// Largest field for which full finish orders are tabulated (6! = 720).
pub const FULL_ORDER_MAX_COMPETITORS: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeSpace {
    /// Outcomes are complete finish orders.
    FinishOrder { n: usize },
    /// Outcomes are winners only.
    Winner,
}

/// Empirical distribution over race outcomes. Keys are competitor ids,
/// winner first; in winner mode each key has one element.
#[derive(Clone, Debug, PartialEq)]
pub struct OutcomePMF {
    pub space: OutcomeSpace,
    pub counts: BTreeMap<Vec<u32>, u64>,
}

impl OutcomePMF {
    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn frequency(&self, outcome: &[u32]) -> f64 {
        self.counts.get(outcome).copied().unwrap_or(0) as f64 / self.total() as f64
    }

    /// `(outcome, count, frequency)` rows in key order.
    pub fn rows(&self) -> Vec<(Vec<u32>, u64, f64)> {
        let total = self.total() as f64;
        self.counts
            .iter()
            .map(|(k, &c)| (k.clone(), c, c as f64 / total))
            .collect()
    }

    /// Win counts per competitor id, summed over outcomes.
    /// Rebuilds a PMF from `(outcome, count)` pairs, inferring the space from
    /// the outcome length.
    pub fn from_counts(counts: BTreeMap<Vec<u32>, u64>) -> Result<Self, StatsError> {
        let n = counts.keys().next().ok_or(StatsError::Empty)?.len();
        if n == 0 || counts.keys().any(|k| k.len() != n) {
            return Err(StatsError::MismatchedSpaces(
                "outcomes differ in length".into(),
            ));
        }
        let space = if n == 1 {
            OutcomeSpace::Winner
        } else {
            OutcomeSpace::FinishOrder { n }
        };
        Ok(Self { space, counts })
    }

    pub fn winner_counts(&self) -> BTreeMap<u32, u64> {
        let mut m = BTreeMap::new();
        for (k, &c) in &self.counts {
            *m.entry(k[0]).or_default() += c;
        }
        m
    }
}

/// Tabulates finish orders (ids, winner first). Fields above six runners,
/// and single-runner fields, are reduced to winners only.
pub fn estimate_pmf(outcomes: &[Vec<u32>]) -> Result<OutcomePMF, StatsError> {
    let n = outcomes.first().ok_or(StatsError::Empty)?.len();
    if n == 0 || outcomes.iter().any(|o| o.len() != n) {
        return Err(StatsError::MismatchedSpaces(
            "finish orders differ in length".into(),
        ));
    }
    let full = (2..=FULL_ORDER_MAX_COMPETITORS).contains(&n);
    let mut counts = BTreeMap::new();
    for o in outcomes {
        let key = if full { o.clone() } else { vec![o[0]] };
        *counts.entry(key).or_insert(0) += 1;
    }
    let space = if full {
        OutcomeSpace::FinishOrder { n }
    } else {
        OutcomeSpace::Winner
    };
    Ok(OutcomePMF { space, counts })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Chi-square test of homogeneity on the 2 x K table of outcome counts,
/// over outcomes observed in either sample.
pub fn compare_pmf(a: &OutcomePMF, b: &OutcomePMF) -> Result<ChiSquare, StatsError> {
    if a.space != b.space {
        return Err(StatsError::MismatchedSpaces(format!(
            "{:?} vs {:?}",
            a.space, b.space
        )));
    }
    let (na, nb) = (a.total() as f64, b.total() as f64);
    if na == 0.0 || nb == 0.0 {
        return Err(StatsError::Empty);
    }
    let keys: BTreeSet<&Vec<u32>> = a.counts.keys().chain(b.counts.keys()).collect();
    let n = na + nb;
    let mut statistic = 0.0;
    for k in &keys {
        let oa = a.counts.get(*k).copied().unwrap_or(0) as f64;
        let ob = b.counts.get(*k).copied().unwrap_or(0) as f64;
        let col = oa + ob;
        let ea = na * col / n;
        let eb = nb * col / n;
        statistic += (oa - ea).powi(2) / ea + (ob - eb).powi(2) / eb;
    }
    let dof = keys.len().saturating_sub(1);
    if dof == 0 {
        return Ok(ChiSquare {
            statistic: 0.0,
            dof,
            p_value: 1.0,
        });
    }
    let dist = ChiSquared::new(dof as f64).expect("positive dof");
    Ok(ChiSquare {
        statistic,
        dof,
        p_value: dist.sf(statistic),
    })
}
