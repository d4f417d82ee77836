//! Synthetic pools with disparate uncertainty between two groups, and the
//! simulation loop that scores every policy on them.

mod sampling;

pub use sampling::{sample_beta, sample_powerlaw, Distribution, PROB_CLAMP};

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost::InclusionEstimate;
use crate::error::{Error, Result};
use crate::metrics::{effectiveness, effectiveness_inclusion, unfairness_auc};
use crate::numeric::{kahan_sum, mean_and_se};
use crate::optim::exposure_lp;
use crate::policies::{inclusion_from_sampler, ts_sample, uniform_sample, PolicyKind, PolicySpec};
use crate::pool::{CandidatePool, Mode, Relevance};
use crate::ranking::Ranking;
use crate::rng::{derive_seed, generator};

pub const MATCH_RETRIES: usize = 1_000_000;

/// Seed stream reserved for group A's draws.
const GROUP_A_STREAM: u64 = u64::MAX;

/// Builds a two-group pool: `fixed_a` as group A, then i.i.d. draws from
/// `dist_b` appended to group B until the expected relevant counts differ
/// by at most 1. A draw that would push `nRel(B)` above `nRel(A) + 1` is
/// discarded.
pub fn matched_pool(fixed_a: &[f64], dist_b: Distribution, seed: u64) -> Result<CandidatePool> {
    dist_b.validate()?;
    let target = kahan_sum(fixed_a.iter().copied());
    if !(target > 1.0) {
        return Err(Error::InvalidParameter(format!(
            "group A needs nRel > 1, got {target}"
        )));
    }
    let mut rng = generator(seed);
    let mut b = Vec::new();
    let mut n_rel_b = 0.0;
    let mut rejected = 0;
    while n_rel_b < target - 1.0 {
        let p = dist_b.sample(&mut rng);
        if n_rel_b + p > target + 1.0 {
            rejected += 1;
            if rejected >= MATCH_RETRIES {
                return Err(Error::MatchFailure { retries: rejected });
            }
            continue;
        }
        b.push(p);
        n_rel_b += p;
    }
    CandidatePool::from_group_probs(&[fixed_a.to_vec(), b])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    High,
    Medium,
    Low,
    Custom,
}

impl Level {
    pub const TABLE: [Level; 3] = [Level::High, Level::Medium, Level::Low];

    pub fn name(self) -> &'static str {
        match self {
            Level::High => "high",
            Level::Medium => "medium",
            Level::Low => "low",
            Level::Custom => "custom",
        }
    }

    /// Distribution of group B; group A is always `Beta(1/20, 1/20)`.
    pub fn group_b(self) -> Option<Distribution> {
        let (alpha, beta) = match self {
            Level::High => (5.0, 5.0),
            Level::Medium => (0.5, 0.5),
            Level::Low => (0.05, 0.05),
            Level::Custom => return None,
        };
        Some(Distribution::Beta { alpha, beta })
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Level {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "high" => Ok(Level::High),
            "medium" => Ok(Level::Medium),
            "low" => Ok(Level::Low),
            "custom" => Ok(Level::Custom),
            _ => Err(Error::InvalidParameter(format!("unknown scenario level '{s}'"))),
        }
    }
}

/// Whether group A is drawn once per seed or afresh for every run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupA {
    #[default]
    Fixed,
    Redraw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub level: Level,
    pub group_a: Distribution,
    pub size_a: usize,
    pub group_b: Distribution,
    /// `None` grows B until its expected relevance matches A's.
    pub size_b: Option<usize>,
    pub group_a_mode: GroupA,
}

impl Scenario {
    pub fn for_level(level: Level) -> Result<Self> {
        let group_b = level.group_b().ok_or_else(|| {
            Error::InvalidParameter("the custom level needs explicit distributions".into())
        })?;
        Ok(Scenario {
            level,
            group_a: Distribution::Beta { alpha: 0.05, beta: 0.05 },
            size_a: 30,
            group_b,
            size_b: None,
            group_a_mode: GroupA::Fixed,
        })
    }

    pub fn custom(group_a: Distribution, size_a: usize, group_b: Distribution, size_b: Option<usize>) -> Self {
        Scenario {
            level: Level::Custom,
            group_a,
            size_a,
            group_b,
            size_b,
            group_a_mode: GroupA::Fixed,
        }
    }

    pub fn with_group_a(mut self, mode: GroupA) -> Self {
        self.group_a_mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.group_a.validate()?;
        self.group_b.validate()?;
        if self.size_a == 0 || self.size_b == Some(0) {
            return Err(Error::InvalidParameter("group sizes must be at least 1".into()));
        }
        Ok(())
    }

    /// Group A's draws for `seed`. In fixed mode they do not depend on
    /// the run, so every run and every level share them.
    pub fn group_a_probs(&self, seed: u64, run: u64) -> Result<Vec<f64>> {
        let s = match self.group_a_mode {
            GroupA::Fixed => derive_seed(seed, GROUP_A_STREAM),
            GroupA::Redraw => derive_seed(derive_seed(seed, run), GROUP_A_STREAM),
        };
        self.group_a.sample_n(self.size_a, s)
    }

    /// The pool of run `run`.
    pub fn pool(&self, seed: u64, run: u64) -> Result<CandidatePool> {
        self.validate()?;
        let a = self.group_a_probs(seed, run)?;
        let b_seed = derive_seed(derive_seed(seed, run), 0);
        match self.size_b {
            None => matched_pool(&a, self.group_b, b_seed),
            Some(m) => {
                let b = self.group_b.sample_n(m, b_seed)?;
                CandidatePool::from_group_probs(&[a, b])
            }
        }
    }
}

/// The policies and column order of the results table.
pub const TABLE_POLICIES: [PolicyKind; 8] = [
    PolicyKind::Eor,
    PolicyKind::Dp,
    PolicyKind::Prp,
    PolicyKind::Ts,
    PolicyKind::Uniform,
    PolicyKind::Exp,
    PolicyKind::Ra,
    PolicyKind::Fairstar,
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub runs: usize,
    pub seed: u64,
    pub policies: Vec<PolicyKind>,
    /// Sampled rankings averaged for a stochastic policy's unfairness.
    pub unfairness_samples: usize,
    /// Monte-Carlo rankings behind Thompson-sampling inclusion estimates.
    pub inclusion_samples: usize,
    pub alpha: f64,
    pub threshold: f64,
    pub protected: Option<usize>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            runs: 100,
            seed: 0,
            policies: TABLE_POLICIES.to_vec(),
            unfairness_samples: 100,
            inclusion_samples: 1000,
            alpha: 0.1,
            threshold: 0.95,
            protected: None,
        }
    }
}

impl RunOptions {
    pub fn new(runs: usize, seed: u64) -> Self {
        RunOptions { runs, seed, ..Default::default() }
    }

    fn spec(&self, kind: PolicyKind) -> PolicySpec {
        let mut spec = PolicySpec::new(kind).with_alpha(self.alpha).with_threshold(self.threshold);
        if let Some(g) = self.protected {
            spec = spec.with_protected(g);
        }
        spec
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub run: usize,
    pub policy: PolicyKind,
    pub unfairness: f64,
    pub effectiveness: f64,
    pub size_a: usize,
    pub size_b: usize,
    pub n_rel_a: f64,
    pub n_rel_b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolicySummary {
    pub policy: PolicyKind,
    pub unfairness_mean: f64,
    /// 0 when only one run was made.
    pub unfairness_se: f64,
    pub effectiveness_mean: f64,
    pub effectiveness_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioReport {
    pub level: Level,
    pub runs: usize,
    pub seed: u64,
    pub summaries: Vec<PolicySummary>,
    /// Ordered by run, then by policy.
    pub records: Vec<RunRecord>,
}

impl ScenarioReport {
    pub fn summary(&self, policy: PolicyKind) -> Option<&PolicySummary> {
        self.summaries.iter().find(|s| s.policy == policy)
    }
}

/// Unfairness and effectiveness of one policy on one pool.
pub fn score_policy(
    spec: &PolicySpec,
    rel: &Relevance<'_>,
    unfairness_samples: usize,
    inclusion_samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let pool = rel.pool();
    let n = pool.len();
    let sampled_auc = |draw: &(dyn Fn(u64) -> Ranking + Sync)| -> Result<f64> {
        if unfairness_samples == 0 {
            return Err(Error::InvalidParameter("need at least one sampled ranking".into()));
        }
        let aucs = (0..unfairness_samples as u64)
            .into_par_iter()
            .map(|s| Ok(unfairness_auc(&rel.trace(&draw(derive_seed(seed, s)))?)))
            .collect::<Result<Vec<f64>>>()?;
        Ok(mean_and_se(&aucs).0)
    };
    match spec.kind {
        PolicyKind::Uniform => {
            // Every candidate sits at every position with probability 1/n.
            let u = sampled_auc(&|s| uniform_sample(pool, s))?;
            let est = InclusionEstimate::from_position_matrix(n, &vec![1.0 / n as f64; n * n])?;
            Ok((u, effectiveness_inclusion(rel, &est)?))
        }
        PolicyKind::Ts => {
            let draw = |s| ts_sample(pool, s);
            let u = sampled_auc(&draw)?;
            let est = inclusion_from_sampler(n, inclusion_samples, derive_seed(seed, u64::MAX), &draw)?;
            Ok((u, effectiveness_inclusion(rel, &est)?))
        }
        PolicyKind::Exp => {
            let lp = exposure_lp(pool)?;
            let birkhoff = lp.decompose()?;
            let u = sampled_auc(&|s| birkhoff.sample(&mut generator(s)))?;
            Ok((u, effectiveness_inclusion(rel, &lp.inclusion())?))
        }
        _ => {
            let trace = rel.trace(&spec.rank(pool)?)?;
            Ok((unfairness_auc(&trace), effectiveness(&trace)))
        }
    }
}

impl Scenario {
    pub fn run(&self, opts: &RunOptions) -> Result<ScenarioReport> {
        self.validate()?;
        if opts.runs == 0 {
            return Err(Error::InvalidParameter("need at least one run".into()));
        }
        let per_run = (0..opts.runs)
            .into_par_iter()
            .map(|run| self.single_run(opts, run))
            .collect::<Result<Vec<Vec<RunRecord>>>>()?;
        let records: Vec<RunRecord> = per_run.into_iter().flatten().collect();
        let summaries = opts
            .policies
            .iter()
            .map(|&policy| {
                let rows: Vec<&RunRecord> = records.iter().filter(|r| r.policy == policy).collect();
                let u: Vec<f64> = rows.iter().map(|r| r.unfairness).collect();
                let e: Vec<f64> = rows.iter().map(|r| r.effectiveness).collect();
                let (unfairness_mean, unfairness_se) = mean_and_se(&u);
                let (effectiveness_mean, effectiveness_se) = mean_and_se(&e);
                PolicySummary {
                    policy,
                    unfairness_mean,
                    unfairness_se,
                    effectiveness_mean,
                    effectiveness_se,
                }
            })
            .collect();
        Ok(ScenarioReport {
            level: self.level,
            runs: opts.runs,
            seed: opts.seed,
            summaries,
            records,
        })
    }

    fn single_run(&self, opts: &RunOptions, run: usize) -> Result<Vec<RunRecord>> {
        let pool = self.pool(opts.seed, run as u64)?;
        let rel = pool.relevance(Mode::Probs)?;
        let run_seed = derive_seed(opts.seed, run as u64);
        let sizes = pool.group_sizes();
        opts.policies
            .iter()
            .enumerate()
            .map(|(slot, &policy)| {
                let spec = opts.spec(policy);
                let policy_seed = derive_seed(run_seed, 1 + slot as u64);
                let (unfairness, effectiveness) = score_policy(
                    &spec,
                    &rel,
                    opts.unfairness_samples,
                    opts.inclusion_samples,
                    policy_seed,
                )?;
                Ok(RunRecord {
                    run,
                    policy,
                    unfairness,
                    effectiveness,
                    size_a: sizes[0],
                    size_b: sizes[1],
                    n_rel_a: rel.n_rel(0),
                    n_rel_b: rel.n_rel(1),
                })
            })
            .collect()
    }
}

/// Runs the table policies on one of the three standard levels.
pub fn scenario_run(level: Level, runs: usize, seed: u64) -> Result<ScenarioReport> {
    Scenario::for_level(level)?.run(&RunOptions::new(runs, seed))
}
