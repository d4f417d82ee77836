//! The per-prefix EOR slack `δ(σ_k)` and the accumulated relevance
//! fractions it is built from.

use crate::error::{Error, Result};
use crate::numeric::KahanSum;
use crate::pool::{CandidatePool, Mode, Relevance};
use crate::ranking::Ranking;

/// Running per-group sums of candidate weights, reported as fractions of a
/// per-group normalizer. A group whose every member has been added reports
/// exactly 1, so complete rankings end at `δ = 0` without rounding residue.
#[derive(Debug, Clone)]
pub(crate) struct FractionAccumulator {
    sums: Vec<KahanSum>,
    counts: Vec<usize>,
    norms: Vec<f64>,
    sizes: Vec<usize>,
}

impl FractionAccumulator {
    pub(crate) fn new(norms: Vec<f64>, sizes: Vec<usize>) -> Self {
        let g = norms.len();
        Self {
            sums: vec![KahanSum::new(); g],
            counts: vec![0; g],
            norms,
            sizes,
        }
    }

    pub(crate) fn for_relevance(rel: &Relevance<'_>) -> Self {
        Self::new(rel.n_rels().to_vec(), rel.sizes().to_vec())
    }

    #[inline]
    pub(crate) fn push(&mut self, g: usize, w: f64) {
        self.sums[g].add(w);
        self.counts[g] += 1;
    }

    #[inline]
    pub(crate) fn fraction(&self, g: usize) -> f64 {
        if self.counts[g] == self.sizes[g] {
            1.0
        } else {
            self.sums[g].value() / self.norms[g]
        }
    }

    /// Fraction of group `g` if one more member with weight `w` were added.
    #[inline]
    pub(crate) fn fraction_after(&self, g: usize, w: f64) -> f64 {
        if self.counts[g] + 1 == self.sizes[g] {
            1.0
        } else {
            self.sums[g].peek_add(w) / self.norms[g]
        }
    }

    /// Accumulated raw weight, with complete groups reported at their
    /// normalizer.
    #[inline]
    pub(crate) fn accumulated(&self, g: usize) -> f64 {
        if self.counts[g] == self.sizes[g] {
            self.norms[g]
        } else {
            self.sums[g].value()
        }
    }

    pub(crate) fn group_count(&self) -> usize {
        self.norms.len()
    }
}

/// `max_g f_g − min_g f_g`.
pub(crate) fn spread(fractions: impl IntoIterator<Item = f64>) -> f64 {
    let (lo, hi) = fractions
        .into_iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), f| {
            (lo.min(f), hi.max(f))
        });
    if lo.is_finite() {
        hi - lo
    } else {
        0.0
    }
}

impl Relevance<'_> {
    /// Group fractions `nRel(g|prefix)/nRel(g)`.
    pub fn fractions(&self, prefix: &[usize]) -> Vec<f64> {
        let pool = self.pool();
        let mut acc = FractionAccumulator::for_relevance(self);
        for &i in prefix {
            acc.push(pool.group_of(i), self.weight(i));
        }
        (0..self.group_count()).map(|g| acc.fraction(g)).collect()
    }

    /// Signed two-group slack: fraction of group 0 minus fraction of group 1.
    pub fn delta_signed(&self, ranking: &Ranking, k: usize) -> Result<f64> {
        self.pool().require_groups(2)?;
        let f = self.fractions(ranking.prefix(k)?);
        Ok(f[0] - f[1])
    }

    /// Spread between the most and least served groups; nonnegative.
    pub fn delta_multi(&self, ranking: &Ranking, k: usize) -> Result<f64> {
        Ok(spread(self.fractions(ranking.prefix(k)?)))
    }

    /// Per-prefix slack, fractions and costs of a full ranking.
    pub fn trace(&self, ranking: &Ranking) -> Result<DeltaTrace> {
        let pool = self.pool();
        let n = pool.len();
        ranking.require_full(n)?;
        let g = self.group_count();
        let signed = g == 2;

        let mut delta = Vec::with_capacity(n + 1);
        let mut fractions = Vec::with_capacity((n + 1) * g);
        let mut total_cost = Vec::with_capacity(n + 1);
        let mut acc = FractionAccumulator::for_relevance(self);
        let total = self.total();

        let mut record = |acc: &FractionAccumulator| {
            let start = fractions.len();
            fractions.extend((0..g).map(|h| acc.fraction(h)));
            let row = &fractions[start..];
            delta.push(if signed {
                row[0] - row[1]
            } else {
                spread(row.iter().copied())
            });
            let missed: KahanSum = (0..g)
                .map(|h| self.n_rel(h) - acc.accumulated(h))
                .collect();
            total_cost.push((missed.value() / total).max(0.0));
        };

        record(&acc);
        for &i in ranking.as_slice() {
            acc.push(pool.group_of(i), self.weight(i));
            record(&acc);
        }
        Ok(DeltaTrace {
            groups: g,
            signed,
            delta,
            fractions,
            total_cost,
        })
    }
}

/// Per-prefix quantities of a full ranking, indexed by prefix length
/// `k = 0..=n`.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaTrace {
    groups: usize,
    signed: bool,
    delta: Vec<f64>,
    fractions: Vec<f64>,
    total_cost: Vec<f64>,
}

impl DeltaTrace {
    /// Number of candidates `n`.
    pub fn len(&self) -> usize {
        self.delta.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn group_count(&self) -> usize {
        self.groups
    }

    /// Whether `delta` is the signed two-group form.
    pub fn is_signed(&self) -> bool {
        self.signed
    }

    pub fn delta(&self, k: usize) -> f64 {
        self.delta[k]
    }

    /// `δ` for `k = 1..=n`.
    pub fn deltas(&self) -> &[f64] {
        &self.delta[1..]
    }

    pub fn fraction(&self, k: usize, g: usize) -> f64 {
        self.fractions[k * self.groups + g]
    }

    pub fn fractions_at(&self, k: usize) -> &[f64] {
        &self.fractions[k * self.groups..(k + 1) * self.groups]
    }

    pub fn group_cost(&self, k: usize, g: usize) -> f64 {
        1.0 - self.fraction(k, g)
    }

    pub fn total_cost(&self, k: usize) -> f64 {
        self.total_cost[k]
    }

    /// Total cost for `k = 1..=n`.
    pub fn total_costs(&self) -> &[f64] {
        &self.total_cost[1..]
    }

    pub fn max_abs_delta(&self) -> f64 {
        self.delta.iter().fold(0.0, |m, d| m.max(d.abs()))
    }
}

pub fn delta_signed(pool: &CandidatePool, ranking: &Ranking, k: usize) -> Result<f64> {
    if pool.group_count() != 2 {
        return Err(Error::WrongGroupCount {
            expected: "2".into(),
            found: pool.group_count(),
        });
    }
    pool.relevance(Mode::Probs)?.delta_signed(ranking, k)
}

pub fn delta_multi(pool: &CandidatePool, ranking: &Ranking, k: usize) -> Result<f64> {
    pool.relevance(Mode::Probs)?.delta_multi(ranking, k)
}

pub fn delta_trace(pool: &CandidatePool, ranking: &Ranking) -> Result<DeltaTrace> {
    pool.relevance(Mode::Probs)?.trace(ranking)
}
