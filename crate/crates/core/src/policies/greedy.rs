//! The greedy merge of per-group PRP queues. EOR balances the fraction of
//! each group's expected relevance selected so far; DP runs the same
//! merge on the fraction of each group's size.

use super::GroupQueues;
use crate::delta::FractionAccumulator;
use crate::error::Result;
use crate::pool::{CandidatePool, Mode};
use crate::ranking::Ranking;

/// Largest and second-largest values with the index of the largest, and
/// the same for the smallest. Lets each candidate extension compute the
/// spread of the untouched groups in O(1).
struct Extremes {
    max1: f64,
    max2: f64,
    argmax: usize,
    min1: f64,
    min2: f64,
    argmin: usize,
}

impl Extremes {
    fn of(values: &[f64]) -> Self {
        let mut e = Extremes {
            max1: f64::NEG_INFINITY,
            max2: f64::NEG_INFINITY,
            argmax: usize::MAX,
            min1: f64::INFINITY,
            min2: f64::INFINITY,
            argmin: usize::MAX,
        };
        for (g, &v) in values.iter().enumerate() {
            if v > e.max1 {
                e.max2 = e.max1;
                e.max1 = v;
                e.argmax = g;
            } else if v > e.max2 {
                e.max2 = v;
            }
            if v < e.min1 {
                e.min2 = e.min1;
                e.min1 = v;
                e.argmin = g;
            } else if v < e.min2 {
                e.min2 = v;
            }
        }
        e
    }

    /// Spread after replacing the value of group `g` by `v`.
    fn spread_with(&self, g: usize, v: f64) -> f64 {
        let other_max = if g == self.argmax { self.max2 } else { self.max1 };
        let other_min = if g == self.argmin { self.min2 } else { self.min1 };
        v.max(other_max) - v.min(other_min)
    }
}

/// Repeatedly appends the head of the group whose selection leaves the
/// smallest spread of group fractions. Ties go to the group with the
/// smaller current fraction, then to the smaller group index.
fn greedy_merge(
    pool: &CandidatePool,
    weight: impl Fn(usize) -> f64,
    mut acc: FractionAccumulator,
) -> Vec<usize> {
    let mut queues = GroupQueues::new(pool);
    let g_count = acc.group_count();
    let mut order = Vec::with_capacity(pool.len());
    let mut current = vec![0.0; g_count];

    for _ in 0..pool.len() {
        for (g, f) in current.iter_mut().enumerate() {
            *f = acc.fraction(g);
        }
        let ext = Extremes::of(&current);
        let mut best: Option<(f64, f64, usize)> = None;
        for (g, &now) in current.iter().enumerate() {
            let Some(i) = queues.head(g) else { continue };
            let spread = ext.spread_with(g, acc.fraction_after(g, weight(i)));
            let better = match best {
                None => true,
                Some((bs, bf, _)) => spread < bs || (spread == bs && now < bf),
            };
            if better {
                best = Some((spread, now, g));
            }
        }
        let (_, _, g) = best.expect("some queue is non-empty while candidates remain");
        let i = queues.pop(g).expect("chosen queue has a head");
        acc.push(g, weight(i));
        order.push(i);
    }
    order
}

/// Equal-opportunity ranking: merges the group PRP queues so that every
/// prefix selects nearly the same fraction of each group's expected
/// relevant candidates.
pub fn eor_ranking(pool: &CandidatePool) -> Result<Ranking> {
    let rel = pool.relevance(Mode::Probs)?;
    let acc = FractionAccumulator::for_relevance(&rel);
    let probs = pool.probs();
    Ok(Ranking::from_trusted(greedy_merge(pool, |i| probs[i], acc)))
}

/// Demographic-parity ranking: the same merge balancing the fraction of
/// each group's candidates selected.
pub fn dp_ranking(pool: &CandidatePool) -> Result<Ranking> {
    pool.require_fairness_groups()?;
    pool.group_stats()?;
    let sizes = pool.group_sizes();
    let norms = sizes.iter().map(|&s| s as f64).collect();
    let acc = FractionAccumulator::new(norms, sizes);
    Ok(Ranking::from_trusted(greedy_merge(pool, |_| 1.0, acc)))
}
