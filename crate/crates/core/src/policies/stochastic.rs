//! Stochastic policies and Monte-Carlo estimates of their inclusion
//! probabilities. Sample `s` of a run seeded with `base` is drawn from
//! `rng::derive_seed(base, s)`, so estimates do not depend on scheduling.

use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::{PolicyKind, PolicySpec};
use crate::cost::InclusionEstimate;
use crate::error::{Error, Result};
use crate::numeric::kahan_sum;
use crate::optim::{exposure_lp, BirkhoffDecomposition};
use crate::pool::{CandidatePool, Mode};
use crate::ranking::Ranking;
use crate::rng::{bernoulli, derive_seed, generator};

/// Uniformly random permutation (Fisher–Yates).
pub fn uniform_sample(pool: &CandidatePool, seed: u64) -> Ranking {
    let mut rng = generator(seed);
    let mut order: Vec<usize> = (0..pool.len()).collect();
    order.shuffle(&mut rng);
    Ranking::from_trusted(order)
}

/// `P(i ∈ σ_k) = k/n` under the uniform policy.
pub fn uniform_inclusion_exact(n: usize, k: usize) -> Result<f64> {
    if k > n {
        return Err(Error::PrefixOutOfRange { k, len: n });
    }
    if n == 0 {
        return Ok(0.0);
    }
    Ok(k as f64 / n as f64)
}

/// Thompson-sampling ranking: draws `r_i ~ Bernoulli(p_i)` in load order,
/// then places all drawn-relevant candidates, shuffled, above the rest,
/// shuffled.
pub fn ts_sample(pool: &CandidatePool, seed: u64) -> Ranking {
    let mut rng = generator(seed);
    let draws: Vec<bool> = pool.probs().iter().map(|&p| bernoulli(&mut rng, p)).collect();
    let mut top: Vec<usize> = (0..pool.len()).filter(|&i| draws[i]).collect();
    let mut rest: Vec<usize> = (0..pool.len()).filter(|&i| !draws[i]).collect();
    top.shuffle(&mut rng);
    rest.shuffle(&mut rng);
    top.extend(rest);
    Ranking::from_trusted(top)
}

enum Sampler {
    Uniform,
    Ts,
    Exp(BirkhoffDecomposition),
}

impl Sampler {
    fn new(spec: &PolicySpec, pool: &CandidatePool) -> Result<Self> {
        match spec.kind {
            PolicyKind::Uniform => Ok(Sampler::Uniform),
            PolicyKind::Ts => Ok(Sampler::Ts),
            PolicyKind::Exp => Ok(Sampler::Exp(exposure_lp(pool)?.decompose()?)),
            other => Err(Error::NotStochastic(other.name().into())),
        }
    }

    fn sample(&self, pool: &CandidatePool, seed: u64) -> Ranking {
        match self {
            Sampler::Uniform => uniform_sample(pool, seed),
            Sampler::Ts => ts_sample(pool, seed),
            Sampler::Exp(b) => b.sample(&mut generator(seed)),
        }
    }
}

/// One ranking drawn from a stochastic policy.
pub fn sample_ranking(spec: &PolicySpec, pool: &CandidatePool, seed: u64) -> Result<Ranking> {
    Ok(Sampler::new(spec, pool)?.sample(pool, seed))
}

/// Monte-Carlo inclusion probabilities from `d` sampled rankings.
pub fn inclusion_estimate(
    spec: &PolicySpec,
    pool: &CandidatePool,
    d: usize,
    base_seed: u64,
) -> Result<InclusionEstimate> {
    if d == 0 {
        return Err(Error::InvalidParameter("need at least one sample".into()));
    }
    let sampler = Sampler::new(spec, pool)?;
    inclusion_from_sampler(pool.len(), d, base_seed, &|seed| sampler.sample(pool, seed))
}

/// Inclusion probabilities from `d` rankings produced by `draw`, where
/// sample `s` uses seed `derive_seed(base_seed, s)`.
pub fn inclusion_from_sampler(
    n: usize,
    d: usize,
    base_seed: u64,
    draw: &(dyn Fn(u64) -> Ranking + Sync),
) -> Result<InclusionEstimate> {
    if d == 0 {
        return Err(Error::InvalidParameter("need at least one sample".into()));
    }
    let counts = (0..d as u64)
        .into_par_iter()
        .fold(
            || vec![0u64; n * n],
            |mut hist, s| {
                let r = draw(derive_seed(base_seed, s));
                for (pos, &i) in r.as_slice().iter().enumerate() {
                    hist[i * n + pos] += 1;
                }
                hist
            },
        )
        .reduce(
            || vec![0u64; n * n],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    InclusionEstimate::from_position_counts(n, &counts, d)
}

/// Draws `m` rankings and returns the one with the lower-median
/// `Σ_k |δ(σ_k)|`.
pub fn median_delta_sample(
    spec: &PolicySpec,
    pool: &CandidatePool,
    m: usize,
    seed: u64,
) -> Result<Ranking> {
    if m == 0 {
        return Err(Error::InvalidParameter("need at least one sample".into()));
    }
    let sampler = Sampler::new(spec, pool)?;
    let rel = pool.relevance(Mode::Probs)?;
    let mut scored = (0..m as u64)
        .into_par_iter()
        .map(|s| {
            let r = sampler.sample(pool, derive_seed(seed, s));
            let score = kahan_sum(rel.trace(&r)?.deltas().iter().map(|d| d.abs()));
            Ok((score, r))
        })
        .collect::<Result<Vec<_>>>()?;
    scored.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(scored.swap_remove((m - 1) / 2).1)
}
