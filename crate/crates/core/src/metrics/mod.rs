//! Evaluation metrics for rankings and policies.

mod calibration;

pub use calibration::{
    calibration_curve, platt_apply, platt_fit, Binning, CalibrationBin, CalibrationCurve,
    PlattParams, CALIBRATION_BINS,
};

use serde::Serialize;

use crate::cost::{InclusionEstimate, TopK};
use crate::delta::DeltaTrace;
use crate::error::{Error, Result};
use crate::numeric::{kahan_sum, KahanSum};
use crate::optim::position_weight;
use crate::pool::{CandidatePool, Mode, Relevance};
use crate::ranking::Ranking;

/// `Σ_{k=1}^{n} |δ(σ_k)|`.
pub fn unfairness_auc(trace: &DeltaTrace) -> f64 {
    kahan_sum(trace.deltas().iter().map(|d| d.abs()))
}

/// Total cost of the uniform policy at prefix `k`: `1 − k/n`.
pub fn uniform_cost(n: usize, k: usize) -> f64 {
    1.0 - k as f64 / n as f64
}

/// `Σ_k [(1 − k/n) − c(k)]` for total costs `c(1..=n)`.
pub fn effectiveness_from_costs(costs: &[f64]) -> f64 {
    let n = costs.len();
    kahan_sum(
        costs
            .iter()
            .enumerate()
            .map(|(k, c)| uniform_cost(n, k + 1) - c),
    )
}

/// Effectiveness of a deterministic ranking.
pub fn effectiveness(trace: &DeltaTrace) -> f64 {
    effectiveness_from_costs(trace.total_costs())
}

/// Effectiveness of a stochastic policy from its inclusion probabilities.
pub fn effectiveness_inclusion(rel: &Relevance<'_>, estimate: &InclusionEstimate) -> Result<f64> {
    Ok(effectiveness_from_costs(&rel.total_cost_curve(estimate)?))
}

/// Per-k nDCG with discount `1/log₂(i + 1)`; the ideal order sorts all
/// gains of the pool in decreasing order. Prefixes whose ideal DCG is 0
/// score 1.
pub fn ndcg(pool: &CandidatePool, ranking: &Ranking, gains: Mode) -> Result<Vec<f64>> {
    let gain: Vec<f64> = match gains {
        Mode::Probs => pool.probs().to_vec(),
        Mode::Labels => pool
            .labels()
            .ok_or(Error::MissingLabels)?
            .iter()
            .map(|&l| f64::from(u8::from(l)))
            .collect(),
    };
    Ranking::new(ranking.as_slice().to_vec(), pool.len())?;
    let mut ideal = gain.clone();
    ideal.sort_by(|a, b| b.total_cmp(a));
    let mut dcg = KahanSum::new();
    let mut idcg = KahanSum::new();
    Ok(ranking
        .as_slice()
        .iter()
        .enumerate()
        .map(|(pos, &i)| {
            let v = position_weight(pos + 1);
            dcg.add(gain[i] * v);
            idcg.add(ideal[pos] * v);
            if idcg.value() > 0.0 {
                dcg.value() / idcg.value()
            } else {
                1.0
            }
        })
        .collect())
}

/// Metrics of a single deterministic ranking.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub unfairness: f64,
    pub effectiveness: f64,
    /// nDCG at `k = 1..=n`, with probability gains.
    pub ndcg: Vec<f64>,
    /// `group_costs[g][k − 1]`.
    pub group_costs: Vec<Vec<f64>>,
    /// Total cost at `k = 1..=n`.
    pub total_costs: Vec<f64>,
}

pub fn evaluate(rel: &Relevance<'_>, ranking: &Ranking) -> Result<EvalReport> {
    let trace = rel.trace(ranking)?;
    let n = trace.len();
    let group_costs = (0..trace.group_count())
        .map(|g| (1..=n).map(|k| trace.group_cost(k, g)).collect())
        .collect();
    Ok(EvalReport {
        unfairness: unfairness_auc(&trace),
        effectiveness: effectiveness(&trace),
        ndcg: ndcg(rel.pool(), ranking, Mode::Probs)?,
        group_costs,
        total_costs: trace.total_costs().to_vec(),
    })
}

/// Group costs at every prefix for a stochastic policy:
/// `result[g][k − 1]`.
pub fn group_cost_curves(rel: &Relevance<'_>, estimate: &InclusionEstimate) -> Result<Vec<Vec<f64>>> {
    let n = estimate.n();
    (0..rel.group_count())
        .map(|g| {
            (1..=n)
                .map(|k| rel.group_cost(TopK::Inclusion { estimate, k }, g))
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::delta::delta_trace;
    use crate::policies::{eor_ranking, prp_ranking};
    use crate::pool::running_example;

    #[test]
    fn prp_ndcg_is_one() {
        let pool = running_example();
        let v = ndcg(&pool, &prp_ranking(&pool), Mode::Probs).unwrap();
        assert!(v.iter().all(|&x| (x - 1.0).abs() < 1e-12));
    }

    #[test]
    fn reversed_ndcg_at_one() {
        let pool = CandidatePool::from_group_probs(&[vec![1.0, 0.5, 0.0]]).unwrap();
        let r = Ranking::new(vec![2, 1, 0], 3).unwrap();
        assert_eq!(ndcg(&pool, &r, Mode::Probs).unwrap()[0], 0.0);
    }

    #[test]
    fn all_zero_gains_score_one() {
        let pool = CandidatePool::from_group_probs(&[vec![0.0, 0.0]]).unwrap();
        let v = ndcg(&pool, &Ranking::identity(2), Mode::Probs).unwrap();
        assert_eq!(v, vec![1.0, 1.0]);
    }

    #[test]
    fn equal_probs_have_zero_effectiveness() {
        let pool = CandidatePool::from_group_probs(&[vec![0.3; 4], vec![0.3; 3]]).unwrap();
        for r in [Ranking::identity(7), Ranking::new(vec![6, 0, 5, 1, 4, 2, 3], 7).unwrap()] {
            let e = effectiveness(&delta_trace(&pool, &r).unwrap());
            assert!(e.abs() < 1e-12);
        }
    }

    #[test]
    fn uniform_costs_score_exactly_zero() {
        let costs: Vec<f64> = (1..=61).map(|k| uniform_cost(61, k)).collect();
        assert_eq!(effectiveness_from_costs(&costs), 0.0);
    }

    #[test]
    fn prp_is_most_effective() {
        let pool = running_example();
        let rel = pool.relevance(Mode::Probs).unwrap();
        let prp = evaluate(&rel, &prp_ranking(&pool)).unwrap();
        let eor = evaluate(&rel, &eor_ranking(&pool).unwrap()).unwrap();
        assert!(prp.effectiveness >= eor.effectiveness);
        assert!(eor.unfairness < prp.unfairness);
    }

    #[test]
    fn balanced_pair_unfairness_by_hand() {
        // Two identical groups [0.6, 0.4]: EOR alternates A, B, A, B.
        // |δ| = 0.6, 0, 0.4, 0 → AUC 1.0.
        let pool = CandidatePool::from_group_probs(&[vec![0.6, 0.4], vec![0.6, 0.4]]).unwrap();
        let t = delta_trace(&pool, &eor_ranking(&pool).unwrap()).unwrap();
        assert!((unfairness_auc(&t) - 1.0).abs() < 1e-12);
    }
}
