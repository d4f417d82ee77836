#![allow(dead_code)]

use eor_core::rng::{generator, uniform53, Generator};
use eor_core::synth::Distribution;
use eor_core::CandidatePool;
use rand::Rng;

pub fn rng(seed: u64) -> Generator {
    generator(seed)
}

/// A group's probabilities in one of several shapes: flat uniform, sharp
/// near 0/1, concentrated around 0.5, or a coarse grid that produces ties.
pub fn group_probs(rng: &mut Generator, size: usize) -> Vec<f64> {
    let style = rng.random_range(0..4);
    (0..size)
        .map(|_| match style {
            0 => 0.01 + 0.98 * uniform53(rng),
            1 => Distribution::Beta { alpha: 0.1, beta: 0.1 }.sample(rng),
            2 => Distribution::Beta { alpha: 5.0, beta: 5.0 }.sample(rng),
            _ => f64::from(rng.random_range(1..=9u32)) / 10.0,
        })
        .collect()
}

/// A pool with `groups` groups and `min_size..=max_size` members each,
/// resampled until every group has expected relevance above 1e-3.
pub fn random_pool(rng: &mut Generator, groups: usize, min_size: usize, max_size: usize) -> CandidatePool {
    loop {
        let probs: Vec<Vec<f64>> = (0..groups)
            .map(|_| {
                let size = rng.random_range(min_size..=max_size);
                group_probs(rng, size)
            })
            .collect();
        if probs.iter().all(|g| g.iter().sum::<f64>() > 1e-3) {
            return CandidatePool::from_group_probs(&probs).unwrap();
        }
    }
}

/// Two groups drawn from the same grid, so that exact ties between group
/// fractions (δ = 0 at interior prefixes) occur often.
pub fn tied_pool(rng: &mut Generator, max_size: usize) -> CandidatePool {
    let size = rng.random_range(1..=max_size);
    let base: Vec<f64> = (0..size)
        .map(|_| f64::from(rng.random_range(1..=8u32)) / 8.0)
        .collect();
    let reps = rng.random_range(1..=3usize);
    let b: Vec<f64> = base.iter().flat_map(|&p| std::iter::repeat_n(p, reps)).collect();
    CandidatePool::from_group_probs(&[base, b]).unwrap()
}
