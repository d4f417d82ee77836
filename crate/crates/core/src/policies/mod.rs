//! Ranking policies: the EOR merge, the deterministic baselines, the
//! stochastic baselines and Monte-Carlo inclusion estimation.

mod greedy;
mod quota;
mod stochastic;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pool::CandidatePool;
use crate::ranking::Ranking;

pub use greedy::{dp_ranking, eor_ranking};
pub use quota::{binomial_cdf, fairstar_minima, fairstar_ranking, prr_ranking, PrrOutcome};
pub use stochastic::{
    inclusion_estimate, inclusion_from_sampler, median_delta_sample, sample_ranking, ts_sample, uniform_inclusion_exact,
    uniform_sample,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    Eor,
    Prp,
    Dp,
    Prr,
    Uniform,
    Ts,
    Fairstar,
    Exp,
    Ra,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 9] = [
        PolicyKind::Eor,
        PolicyKind::Prp,
        PolicyKind::Dp,
        PolicyKind::Prr,
        PolicyKind::Uniform,
        PolicyKind::Ts,
        PolicyKind::Fairstar,
        PolicyKind::Exp,
        PolicyKind::Ra,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Eor => "eor",
            PolicyKind::Prp => "prp",
            PolicyKind::Dp => "dp",
            PolicyKind::Prr => "prr",
            PolicyKind::Uniform => "uniform",
            PolicyKind::Ts => "ts",
            PolicyKind::Fairstar => "fairstar",
            PolicyKind::Exp => "exp",
            PolicyKind::Ra => "ra",
        }
    }

    /// Policies whose output is a distribution over rankings.
    pub fn is_stochastic(self) -> bool {
        matches!(self, PolicyKind::Uniform | PolicyKind::Ts | PolicyKind::Exp)
    }

    pub fn needs_protected_group(self) -> bool {
        matches!(self, PolicyKind::Prr | PolicyKind::Fairstar)
    }
}

impl std::fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PolicyKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidParameter(format!("unknown policy {s:?}")))
    }
}

/// A policy with its parameters. `protected` defaults to group 1, `alpha`
/// to 0.1 and `threshold` to 0.95.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicySpec {
    pub kind: PolicyKind,
    pub protected: Option<usize>,
    pub alpha: f64,
    pub seed: Option<u64>,
    pub threshold: f64,
}

impl PolicySpec {
    pub const DEFAULT_ALPHA: f64 = 0.1;
    pub const DEFAULT_THRESHOLD: f64 = 0.95;
    pub const DEFAULT_PROTECTED: usize = 1;

    pub fn new(kind: PolicyKind) -> Self {
        Self {
            kind,
            protected: None,
            alpha: Self::DEFAULT_ALPHA,
            seed: None,
            threshold: Self::DEFAULT_THRESHOLD,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn with_protected(mut self, group: usize) -> Self {
        self.protected = Some(group);
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.threshold = threshold;
        self
    }

    pub fn protected_group(&self) -> usize {
        self.protected.unwrap_or(Self::DEFAULT_PROTECTED)
    }

    pub fn validate(&self, pool: &CandidatePool) -> Result<()> {
        if self.kind == PolicyKind::Fairstar && !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if self.kind == PolicyKind::Ra && !(self.threshold > 0.0 && self.threshold <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "exposure threshold must lie in (0, 1], got {}",
                self.threshold
            )));
        }
        if self.kind.needs_protected_group() && self.protected_group() >= pool.group_count() {
            return Err(Error::InvalidParameter(format!(
                "protected group {} does not exist",
                self.protected_group()
            )));
        }
        if self.kind.is_stochastic() && self.seed.is_none() {
            return Err(Error::InvalidParameter(format!(
                "policy {} needs a seed",
                self.kind
            )));
        }
        Ok(())
    }

    /// Produces one ranking: the policy's ranking for deterministic kinds,
    /// one sample for stochastic ones.
    pub fn rank(&self, pool: &CandidatePool) -> Result<Ranking> {
        self.validate(pool)?;
        match self.kind {
            PolicyKind::Eor => eor_ranking(pool),
            PolicyKind::Prp => Ok(prp_ranking(pool)),
            PolicyKind::Dp => dp_ranking(pool),
            PolicyKind::Prr => prr_ranking(pool, self.protected_group()).map(|o| o.ranking),
            PolicyKind::Fairstar => fairstar_ranking(pool, self.protected_group(), self.alpha),
            PolicyKind::Uniform | PolicyKind::Ts | PolicyKind::Exp => {
                sample_ranking(self, pool, self.seed.unwrap_or_default())
            }
            PolicyKind::Ra => {
                crate::optim::rank_aggregation_exposure(pool, self.threshold).map(|o| o.ranking)
            }
        }
    }
}

/// Sorts `indices` by probability, highest first; equal probabilities keep
/// their current relative order.
pub(crate) fn sort_prp(pool: &CandidatePool, indices: &mut [usize]) {
    let probs = pool.probs();
    indices.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]));
}

/// All candidates by decreasing probability, ties in load order.
pub fn prp_ranking(pool: &CandidatePool) -> Ranking {
    let mut order: Vec<usize> = (0..pool.len()).collect();
    sort_prp(pool, &mut order);
    Ranking::from_trusted(order)
}

/// Each group's candidates in PRP order, with a cursor at the next
/// unselected one.
#[derive(Debug, Clone)]
pub struct GroupQueues {
    queues: Vec<Vec<usize>>,
    heads: Vec<usize>,
}

impl GroupQueues {
    pub fn new(pool: &CandidatePool) -> Self {
        let mut queues = vec![Vec::new(); pool.group_count()];
        for (i, &g) in pool.groups().iter().enumerate() {
            queues[g].push(i);
        }
        for q in &mut queues {
            sort_prp(pool, q);
        }
        Self {
            heads: vec![0; queues.len()],
            queues,
        }
    }

    pub fn group_count(&self) -> usize {
        self.queues.len()
    }

    pub fn queue(&self, g: usize) -> &[usize] {
        &self.queues[g]
    }

    /// Next unselected candidate of group `g`.
    pub fn head(&self, g: usize) -> Option<usize> {
        self.queues[g].get(self.heads[g]).copied()
    }

    /// Number of candidates of group `g` taken so far.
    pub fn taken(&self, g: usize) -> usize {
        self.heads[g]
    }

    pub fn pop(&mut self, g: usize) -> Option<usize> {
        let h = self.head(g)?;
        self.heads[g] += 1;
        Some(h)
    }

    pub fn is_exhausted(&self, g: usize) -> bool {
        self.heads[g] >= self.queues[g].len()
    }

    /// The PRP-best head over all groups: highest probability, ties to the
    /// lower load index.
    pub fn best_head(&self, pool: &CandidatePool) -> Option<(usize, usize)> {
        let mut best: Option<(usize, usize)> = None;
        for g in 0..self.queues.len() {
            if let Some(i) = self.head(g) {
                let better = match best {
                    None => true,
                    Some((_, j)) => {
                        let (pi, pj) = (pool.prob(i), pool.prob(j));
                        pi > pj || (pi == pj && i < j)
                    }
                };
                if better {
                    best = Some((g, i));
                }
            }
        }
        best
    }
}
