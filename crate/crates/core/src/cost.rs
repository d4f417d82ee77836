//! Cost of opportunity: per candidate, per group and for the principal,
//! for deterministic prefixes and for stochastic policies via inclusion
//! probabilities.

use crate::error::{Error, Result};
use crate::numeric::KahanSum;
use crate::pool::{CandidatePool, Mode, Relevance};
use crate::ranking::Ranking;

/// `r · (1 − P(i ∈ σ_k))`: a relevant candidate pays the chance of being
/// left out; an irrelevant one pays nothing.
pub fn candidate_cost(incl_prob: f64, relevant: bool) -> f64 {
    if relevant {
        1.0 - incl_prob
    } else {
        0.0
    }
}

/// Beta-Bernoulli posterior predictive probability of a success after
/// `successes` out of `trials` under a `Beta(prior_a, prior_b)` prior.
pub fn posterior_predictive_mean(
    successes: u64,
    trials: u64,
    prior_a: f64,
    prior_b: f64,
) -> Result<f64> {
    let valid = successes <= trials
        && prior_a > 0.0
        && prior_b > 0.0
        && prior_a.is_finite()
        && prior_b.is_finite();
    if !valid {
        return Err(Error::InvalidPrior {
            a: prior_a,
            b: prior_b,
            successes,
            trials,
        });
    }
    Ok((prior_a + successes as f64) / (prior_a + prior_b + trials as f64))
}

/// Marginal inclusion probabilities `incl[k][i] = P(i ∈ σ_k)` for
/// `k = 0..=n`.
#[derive(Debug, Clone, PartialEq)]
pub struct InclusionEstimate {
    n: usize,
    sample_count: usize,
    incl: Vec<f64>,
}

impl InclusionEstimate {
    /// From a histogram `counts[i * n + pos]` of how often candidate `i`
    /// landed at 0-based position `pos` over `d` sampled rankings.
    pub fn from_position_counts(n: usize, counts: &[u64], d: usize) -> Result<Self> {
        if counts.len() != n * n || d == 0 {
            return Err(Error::InvalidParameter(format!(
                "position histogram needs {} cells and d >= 1",
                n * n
            )));
        }
        let mut incl = vec![0.0; (n + 1) * n];
        let scale = d as f64;
        for i in 0..n {
            let mut cum = 0u64;
            for pos in 0..n {
                cum += counts[i * n + pos];
                incl[(pos + 1) * n + i] = cum as f64 / scale;
            }
        }
        Ok(Self {
            n,
            sample_count: d,
            incl,
        })
    }

    /// From sampled full rankings of a pool of `n` candidates.
    pub fn from_rankings<'a, I>(n: usize, rankings: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a Ranking>,
    {
        let mut counts = vec![0u64; n * n];
        let mut d = 0;
        for r in rankings {
            r.require_full(n)?;
            for (pos, &i) in r.as_slice().iter().enumerate() {
                counts[i * n + pos] += 1;
            }
            d += 1;
        }
        Self::from_position_counts(n, &counts, d)
    }

    /// The 0/1 indicator of a single deterministic ranking.
    pub fn deterministic(ranking: &Ranking, n: usize) -> Result<Self> {
        Self::from_rankings(n, std::iter::once(ranking))
    }

    /// From a row-major `n × n` matrix of position probabilities
    /// (`sigma[i * n + j] = P(i at position j)`). Cumulative sums are
    /// clamped to `[0, 1]`.
    pub fn from_position_matrix(n: usize, sigma: &[f64]) -> Result<Self> {
        if sigma.len() != n * n {
            return Err(Error::InvalidParameter(format!(
                "position matrix needs {} entries",
                n * n
            )));
        }
        let mut incl = vec![0.0; (n + 1) * n];
        for i in 0..n {
            let mut cum = KahanSum::new();
            for j in 0..n {
                cum.add(sigma[i * n + j]);
                incl[(j + 1) * n + i] = cum.value().clamp(0.0, 1.0);
            }
        }
        Ok(Self {
            n,
            sample_count: 0,
            incl,
        })
    }

    /// Number of candidates.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of sampled rankings; 0 for estimates not built from samples.
    pub fn sample_count(&self) -> usize {
        self.sample_count
    }

    pub fn get(&self, k: usize, i: usize) -> f64 {
        self.incl[k * self.n + i]
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.incl[k * self.n..(k + 1) * self.n]
    }
}

/// A top-k selection, either a deterministic prefix or a stochastic
/// policy summarized by inclusion probabilities.
#[derive(Debug, Clone, Copy)]
pub enum TopK<'a> {
    Prefix { ranking: &'a Ranking, k: usize },
    Inclusion { estimate: &'a InclusionEstimate, k: usize },
}

impl Relevance<'_> {
    fn check_top_k(&self, top: TopK<'_>) -> Result<()> {
        match top {
            TopK::Prefix { ranking, k } => ranking.prefix(k).map(|_| ()),
            TopK::Inclusion { estimate, k } => {
                if estimate.n() != self.pool().len() {
                    return Err(Error::InvalidParameter(format!(
                        "inclusion estimate covers {} candidates, pool has {}",
                        estimate.n(),
                        self.pool().len()
                    )));
                }
                if k > estimate.n() {
                    return Err(Error::PrefixOutOfRange {
                        k,
                        len: estimate.n(),
                    });
                }
                Ok(())
            }
        }
    }

    /// Expected relevant candidates of each group inside the top k.
    pub fn selected_relevance(&self, top: TopK<'_>) -> Result<Vec<f64>> {
        self.check_top_k(top)?;
        let g = self.group_count();
        match top {
            TopK::Prefix { ranking, k } => {
                let f = self.fractions(ranking.prefix(k)?);
                Ok((0..g).map(|h| f[h] * self.n_rel(h)).collect())
            }
            TopK::Inclusion { estimate, k } => {
                let mut acc = vec![KahanSum::new(); g];
                let pool = self.pool();
                for (i, &p) in estimate.row(k).iter().enumerate() {
                    acc[pool.group_of(i)].add(p * self.weight(i));
                }
                Ok(acc.iter().map(KahanSum::value).collect())
            }
        }
    }

    /// `1 − nRel(g|π_k)/nRel(g)`.
    pub fn group_cost(&self, top: TopK<'_>, g: usize) -> Result<f64> {
        if g >= self.group_count() {
            return Err(Error::InvalidParameter(format!("no group {g}")));
        }
        if let TopK::Prefix { ranking, k } = top {
            return Ok(1.0 - self.fractions(ranking.prefix(k)?)[g]);
        }
        Ok(1.0 - self.selected_relevance(top)?[g] / self.n_rel(g))
    }

    /// `Σ_i (1 − P(i ∈ σ_k)) w_i / Σ_g nRel(g)`.
    pub fn total_cost(&self, top: TopK<'_>) -> Result<f64> {
        let selected = self.selected_relevance(top)?;
        let missed: KahanSum = selected
            .iter()
            .enumerate()
            .map(|(g, s)| self.n_rel(g) - s)
            .collect();
        Ok((missed.value() / self.total()).max(0.0))
    }

    /// Total cost at every `k = 1..=n` for a stochastic policy.
    pub fn total_cost_curve(&self, estimate: &InclusionEstimate) -> Result<Vec<f64>> {
        (1..=estimate.n())
            .map(|k| self.total_cost(TopK::Inclusion { estimate, k }))
            .collect()
    }
}

pub fn group_cost(pool: &CandidatePool, top: TopK<'_>, g: usize) -> Result<f64> {
    pool.relevance(Mode::Probs)?.group_cost(top, g)
}

pub fn total_cost(pool: &CandidatePool, top: TopK<'_>) -> Result<f64> {
    pool.relevance(Mode::Probs)?.total_cost(top)
}
