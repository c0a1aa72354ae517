use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::StatsError;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KruskalWallis {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Kruskal-Wallis H test with the usual tie correction. Empty groups are
/// ignored; at least two non-empty groups are required.
pub fn kruskal_wallis(groups: &[&[f64]]) -> Result<KruskalWallis, StatsError> {
    let groups: Vec<&[f64]> = groups.iter().copied().filter(|g| !g.is_empty()).collect();
    if groups.len() < 2 {
        return Err(StatsError::TooFewGroups);
    }
    let mut pooled: Vec<(f64, usize)> = groups
        .iter()
        .enumerate()
        .flat_map(|(g, xs)| xs.iter().map(move |&x| (x, g)))
        .collect();
    pooled.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = pooled.len() as f64;

    let mut rank_sums = vec![0.0; groups.len()];
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < pooled.len() {
        let mut j = i;
        while j + 1 < pooled.len() && pooled[j + 1].0 == pooled[i].0 {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for item in &pooled[i..=j] {
            rank_sums[item.1] += rank;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }

    let h: f64 = groups
        .iter()
        .zip(&rank_sums)
        .map(|(g, r)| r * r / g.len() as f64)
        .sum::<f64>()
        * 12.0
        / (n * (n + 1.0))
        - 3.0 * (n + 1.0);
    let correction = 1.0 - tie_term / (n * n * n - n);
    let dof = groups.len() - 1;
    if correction <= 0.0 {
        // every observation equal
        return Ok(KruskalWallis {
            statistic: 0.0,
            dof,
            p_value: 1.0,
        });
    }
    let statistic = h / correction;
    let p_value = ChiSquared::new(dof as f64)
        .expect("positive dof")
        .sf(statistic);
    Ok(KruskalWallis {
        statistic,
        dof,
        p_value,
    })
}
