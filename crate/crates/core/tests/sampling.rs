//! Samplers and closed forms against independent references.

mod common;

use eor_core::policies::{
    binomial_cdf, fairstar_minima, inclusion_estimate, ts_sample, uniform_inclusion_exact,
};
use eor_core::rng::derive_seed;
use eor_core::synth::{sample_beta, sample_powerlaw, PROB_CLAMP};
use eor_core::{CandidatePool, InclusionEstimate, PolicyKind, PolicySpec, Ranking};
use statrs::distribution::{Beta, Binomial, ContinuousCDF, DiscreteCDF};

/// Kolmogorov–Smirnov statistic of `xs` against `cdf`, clamped to
/// `[PROB_CLAMP, 1 − PROB_CLAMP]` like the samplers: the clamp points are
/// atoms, with CDF left limit 0 at the bottom and right limit 1 at the top.
fn ks(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut worst: f64 = 0.0;
    let mut i = 0;
    while i < xs.len() {
        let x = xs[i];
        let mut j = i;
        while j < xs.len() && xs[j] == x {
            j += 1;
        }
        let f = cdf(x);
        let left = if x <= PROB_CLAMP { 0.0 } else { f };
        let right = if x >= 1.0 - PROB_CLAMP { 1.0 } else { f };
        worst = worst.max((left - i as f64 / n).abs()).max((right - j as f64 / n).abs());
        i = j;
    }
    worst
}

/// 1% critical value of the one-sample KS test.
fn ks_critical(n: usize) -> f64 {
    1.63 / (n as f64).sqrt()
}

#[test]
fn beta_draws_pass_ks() {
    for (a, b, seed) in [(5.0, 5.0, 1), (0.5, 0.5, 2), (2.0, 7.0, 3), (0.05, 0.05, 4)] {
        let xs = sample_beta(a, b, 10_000, seed).unwrap();
        let d = Beta::new(a, b).unwrap();
        let stat = ks(xs, |x| d.cdf(x));
        assert!(stat < ks_critical(10_000), "Beta({a}, {b}): D = {stat}");
    }
}

#[test]
fn powerlaw_one_is_uniform() {
    let xs = sample_powerlaw(1.0, 10_000, 11).unwrap();
    let stat = ks(xs, |x| x.clamp(0.0, 1.0));
    assert!(stat < ks_critical(10_000), "D = {stat}");
}

#[test]
fn powerlaw_matches_its_cdf() {
    for eta in [0.5, 5.0] {
        let xs = sample_powerlaw(eta, 10_000, 12).unwrap();
        let stat = ks(xs, |x| x.clamp(0.0, 1.0).powf(eta));
        assert!(stat < ks_critical(10_000), "eta {eta}: D = {stat}");
    }
}

#[test]
fn binomial_cdf_matches_statrs() {
    for k in [1usize, 4, 10, 37, 100, 400] {
        for p in [0.05, 0.3, 0.5, 0.77, 0.99] {
            let reference = Binomial::new(p, k as u64).unwrap();
            for m in 0..=k {
                let got = binomial_cdf(m, k, p);
                let want = reference.cdf(m as u64);
                assert!((got - want).abs() < 1e-9, "k {k} p {p} m {m}: {got} vs {want}");
            }
        }
    }
}

#[test]
fn fairstar_minima_match_inverse_cdf() {
    for (p, alpha) in [(0.5, 0.1), (0.3, 0.05), (0.7, 0.1), (0.1, 0.01)] {
        let minima = fairstar_minima(200, p, alpha).unwrap();
        for k in 1..=200usize {
            let reference = Binomial::new(p, k as u64).unwrap();
            let want = (0..=k).find(|&m| reference.cdf(m as u64) > alpha).unwrap();
            assert_eq!(minima[k - 1], want, "p {p} alpha {alpha} k {k}");
        }
    }
}

#[test]
fn uniform_inclusion_matches_closed_form() {
    let pool = CandidatePool::from_group_probs(&[vec![0.9, 0.2, 0.4, 0.1], vec![0.5, 0.6, 0.3]]).unwrap();
    let n = pool.len();
    let est = inclusion_estimate(&PolicySpec::new(PolicyKind::Uniform), &pool, 20_000, 5).unwrap();
    for k in 0..=n {
        let want = uniform_inclusion_exact(n, k).unwrap();
        for i in 0..n {
            assert!((est.get(k, i) - want).abs() < 0.015, "k {k} i {i}");
        }
    }
}

/// `P(i is ranked first)` under Thompson sampling: i must draw relevant
/// and win the shuffle among the other relevant draws, or nobody draws
/// relevant and i wins the shuffle of everyone.
fn ts_top_probability(probs: &[f64], i: usize) -> f64 {
    // Poisson-binomial distribution of the other candidates' draws.
    let mut dist = vec![1.0];
    for (j, &p) in probs.iter().enumerate() {
        if j == i {
            continue;
        }
        let mut next = vec![0.0; dist.len() + 1];
        for (c, &w) in dist.iter().enumerate() {
            next[c] += w * (1.0 - p);
            next[c + 1] += w * p;
        }
        dist = next;
    }
    let win: f64 = dist.iter().enumerate().map(|(c, w)| w / (c + 1) as f64).sum();
    let none: f64 = probs.iter().map(|p| 1.0 - p).product();
    probs[i] * win + none / probs.len() as f64
}

#[test]
fn thompson_rank_one_matches_poisson_binomial() {
    let probs = vec![0.9, 0.6, 0.3, 0.05, 0.5, 0.2];
    let pool = CandidatePool::from_group_probs(&[probs[..3].to_vec(), probs[3..].to_vec()]).unwrap();
    let draws: Vec<Ranking> = (0..40_000).map(|s| ts_sample(&pool, derive_seed(3, s))).collect();
    let est = InclusionEstimate::from_rankings(pool.len(), &draws).unwrap();
    for i in 0..probs.len() {
        let want = ts_top_probability(&probs, i);
        assert!((est.get(1, i) - want).abs() < 0.01, "candidate {i}: {} vs {want}", est.get(1, i));
    }
}

#[test]
fn thompson_inclusion_through_the_policy_api() {
    let probs = vec![0.9, 0.6, 0.3, 0.05, 0.5, 0.2];
    let pool = CandidatePool::from_group_probs(&[probs[..3].to_vec(), probs[3..].to_vec()]).unwrap();
    let est = inclusion_estimate(&PolicySpec::new(PolicyKind::Ts), &pool, 40_000, 8).unwrap();
    for i in 0..probs.len() {
        assert!((est.get(1, i) - ts_top_probability(&probs, i)).abs() < 0.01);
    }
    // Every row of an inclusion matrix sums to its prefix length.
    for k in 0..=pool.len() {
        let sum: f64 = est.row(k).iter().sum();
        assert!((sum - k as f64).abs() < 1e-9);
    }
}
