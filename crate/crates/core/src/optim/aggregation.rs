//! Exposure-constrained rank aggregation with PRP as the consensus
//! ranking: adjacent swaps lift the least exposed group until the
//! min/max exposure ratio reaches the threshold.

use serde::Serialize;

use super::exposure::position_weight;
use crate::error::{Error, Result};
use crate::policies::prp_ranking;
use crate::pool::CandidatePool;
use crate::ranking::Ranking;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregationOutcome {
    pub ranking: Ranking,
    /// `min_g Exposure(g) / max_g Exposure(g)` of the returned ranking.
    pub ratio: f64,
    pub swaps: usize,
    /// The threshold was not reached: no swap improved the ratio, or the
    /// iteration cap was hit.
    pub best_effort: bool,
}

/// Mean position weight `Σ_{i∈g} v_pos(i) / S(g)` of each group.
pub fn group_exposure(pool: &CandidatePool, ranking: &Ranking) -> Result<Vec<f64>> {
    ranking.require_full(pool.len())?;
    let mut sums = vec![0.0; pool.group_count()];
    for (pos, &i) in ranking.as_slice().iter().enumerate() {
        sums[pool.group_of(i)] += position_weight(pos + 1);
    }
    let sizes = pool.group_sizes();
    Ok(sums
        .iter()
        .zip(&sizes)
        .map(|(s, &n)| if n == 0 { 0.0 } else { s / n as f64 })
        .collect())
}

fn ratio_of(exposure: &[f64]) -> f64 {
    let (lo, hi) = exposure
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &e| (lo.min(e), hi.max(e)));
    if hi > 0.0 {
        lo / hi
    } else {
        1.0
    }
}

pub fn exposure_ratio(pool: &CandidatePool, ranking: &Ranking) -> Result<f64> {
    Ok(ratio_of(&group_exposure(pool, ranking)?))
}

pub fn rank_aggregation_exposure(pool: &CandidatePool, threshold: f64) -> Result<AggregationOutcome> {
    pool.require_fairness_groups()?;
    pool.group_stats()?;
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "exposure threshold must lie in (0, 1], got {threshold}"
        )));
    }
    let n = pool.len();
    let sizes: Vec<f64> = pool.group_sizes().iter().map(|&s| s as f64).collect();
    let mut order = prp_ranking(pool).into_vec();
    let mut exposure = group_exposure(pool, &Ranking::from_trusted(order.clone()))?;
    let mut swaps = 0;
    let cap = n.saturating_mul(n).max(1);
    let mut best_effort = false;

    loop {
        let ratio = ratio_of(&exposure);
        if ratio >= threshold {
            break;
        }
        if swaps >= cap {
            best_effort = true;
            break;
        }
        let lagging = (0..exposure.len())
            .min_by(|&a, &b| exposure[a].total_cmp(&exposure[b]))
            .expect("at least two groups");
        let mut applied = false;
        for j in 0..n.saturating_sub(1) {
            let (upper, lower) = (order[j], order[j + 1]);
            let (gu, gl) = (pool.group_of(upper), pool.group_of(lower));
            if gl != lagging || gu == lagging {
                continue;
            }
            let gain = position_weight(j + 1) - position_weight(j + 2);
            let mut trial = exposure.clone();
            trial[gl] += gain / sizes[gl];
            trial[gu] -= gain / sizes[gu];
            if ratio_of(&trial) > ratio {
                order.swap(j, j + 1);
                exposure = trial;
                swaps += 1;
                applied = true;
                break;
            }
        }
        if !applied {
            best_effort = true;
            break;
        }
    }
    let ranking = Ranking::from_trusted(order);
    let ratio = exposure_ratio(pool, &ranking)?;
    Ok(AggregationOutcome {
        ranking,
        ratio,
        swaps,
        best_effort,
    })
}
