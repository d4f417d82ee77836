//! Brute-force top-k selection under a relevance-fraction spread cap.

use serde::Serialize;

use crate::delta::spread;
use crate::error::{Error, Result};
use crate::numeric::KahanSum;
use crate::pool::{CandidatePool, Mode};

/// Largest pool the exhaustive search accepts.
pub const ILP_MAX_N: usize = 24;

/// Slack added to the cap when testing feasibility, so subsets whose
/// spread equals the cap up to summation order are accepted.
pub const CAP_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IlpSearch {
    /// Every size-k subset, pruned by an objective upper bound.
    #[default]
    Exhaustive,
    /// Only subsets made of a PRP prefix of each group. Not exact: the
    /// optimum can need a non-prefix subset when the cap binds, so this is
    /// a lower bound on the true optimum.
    GroupPrefixes,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IlpSolution {
    /// Selected candidate indices, ascending.
    pub subset: Vec<usize>,
    /// `Σ_{i∈S} p_i`.
    pub sum_prob: f64,
    /// `Σ_{i∈S} p_i / Σ_g nRel(g)`, the primal objective.
    pub objective: f64,
}

/// The size-`k` subset maximizing `Σ p_i` subject to
/// `max_g f_g − min_g f_g ≤ delta_cap`, where `f_g` is the fraction of
/// group g's expected relevance inside the subset.
pub fn ilp_top_k(pool: &CandidatePool, k: usize, delta_cap: f64) -> Result<IlpSolution> {
    ilp_top_k_with(pool, k, delta_cap, IlpSearch::Exhaustive)
}

pub fn ilp_top_k_with(
    pool: &CandidatePool,
    k: usize,
    delta_cap: f64,
    search: IlpSearch,
) -> Result<IlpSolution> {
    let n = pool.len();
    if n > ILP_MAX_N {
        return Err(Error::TooLarge {
            n,
            limit: ILP_MAX_N,
        });
    }
    if k > n {
        return Err(Error::PrefixOutOfRange { k, len: n });
    }
    if !(delta_cap >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "delta cap must be nonnegative, got {delta_cap}"
        )));
    }
    let rel = pool.relevance(Mode::Probs)?;
    let mut search_state = Search::new(pool, rel.n_rels(), rel.sizes(), k, delta_cap + CAP_SLACK);
    match search {
        IlpSearch::Exhaustive => search_state.exhaustive(),
        IlpSearch::GroupPrefixes => search_state.prefixes(),
    }
    let Some(mut subset) = search_state.best_subset else {
        return Err(Error::Infeasible);
    };
    subset.sort_unstable();
    let sum_prob = subset.iter().map(|&i| pool.prob(i)).collect::<KahanSum>().value();
    Ok(IlpSolution {
        objective: sum_prob / rel.total(),
        sum_prob,
        subset,
    })
}

struct Search<'a> {
    pool: &'a CandidatePool,
    n_rel: &'a [f64],
    sizes: &'a [usize],
    k: usize,
    cap: f64,
    /// Candidates by decreasing probability.
    order: Vec<usize>,
    /// Running sums of probabilities along `order`.
    prefix_sum: Vec<f64>,
    best_value: f64,
    best_subset: Option<Vec<usize>>,
}

impl<'a> Search<'a> {
    fn new(
        pool: &'a CandidatePool,
        n_rel: &'a [f64],
        sizes: &'a [usize],
        k: usize,
        cap: f64,
    ) -> Self {
        let mut order: Vec<usize> = (0..pool.len()).collect();
        crate::policies::sort_prp(pool, &mut order);
        let mut prefix_sum = Vec::with_capacity(order.len() + 1);
        prefix_sum.push(0.0);
        let mut acc = 0.0;
        for &i in &order {
            acc += pool.prob(i);
            prefix_sum.push(acc);
        }
        Self {
            pool,
            n_rel,
            sizes,
            k,
            cap,
            order,
            prefix_sum,
            best_value: f64::NEG_INFINITY,
            best_subset: None,
        }
    }

    fn fractions(&self, subset: &[usize]) -> Vec<f64> {
        let g = self.n_rel.len();
        let mut sums = vec![KahanSum::new(); g];
        let mut counts = vec![0usize; g];
        for &i in subset {
            let h = self.pool.group_of(i);
            sums[h].add(self.pool.prob(i));
            counts[h] += 1;
        }
        (0..g)
            .map(|h| {
                if counts[h] == self.sizes[h] {
                    1.0
                } else {
                    sums[h].value() / self.n_rel[h]
                }
            })
            .collect()
    }

    fn offer(&mut self, subset: &[usize]) {
        if spread(self.fractions(subset)) > self.cap {
            return;
        }
        let value: f64 = subset.iter().map(|&i| self.pool.prob(i)).sum();
        if value > self.best_value {
            self.best_value = value;
            self.best_subset = Some(subset.to_vec());
        }
    }

    fn exhaustive(&mut self) {
        let mut chosen = Vec::with_capacity(self.k);
        self.dfs(0, 0.0, &mut chosen);
    }

    fn dfs(&mut self, pos: usize, value: f64, chosen: &mut Vec<usize>) {
        let need = self.k - chosen.len();
        if need == 0 {
            self.offer(chosen);
            return;
        }
        let n = self.order.len();
        if n - pos < need {
            return;
        }
        // The best completion takes the next `need` items in order.
        let bound = value + (self.prefix_sum[pos + need] - self.prefix_sum[pos]);
        if bound + 1e-12 < self.best_value {
            return;
        }
        let i = self.order[pos];
        chosen.push(i);
        self.dfs(pos + 1, value + self.pool.prob(i), chosen);
        chosen.pop();
        self.dfs(pos + 1, value, chosen);
    }

    fn prefixes(&mut self) {
        let g = self.n_rel.len();
        let queues: Vec<Vec<usize>> = (0..g)
            .map(|h| {
                let mut q: Vec<usize> = self.pool.members(h).collect();
                crate::policies::sort_prp(self.pool, &mut q);
                q
            })
            .collect();
        let mut counts = vec![0usize; g];
        self.compositions(&queues, 0, self.k, &mut counts);
    }

    fn compositions(&mut self, queues: &[Vec<usize>], h: usize, left: usize, counts: &mut [usize]) {
        if h + 1 == queues.len() {
            if left <= queues[h].len() {
                counts[h] = left;
                let subset: Vec<usize> = queues
                    .iter()
                    .zip(counts.iter())
                    .flat_map(|(q, &c)| q[..c].iter().copied())
                    .collect();
                self.offer(&subset);
            }
            return;
        }
        for c in 0..=left.min(queues[h].len()) {
            counts[h] = c;
            self.compositions(queues, h + 1, left - c, counts);
        }
    }
}
