use serde::Serialize;

use crate::error::{Error, Result};

/// A permutation of candidate indices, or a prefix of one.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
#[serde(transparent)]
pub struct Ranking(Vec<usize>);

impl Ranking {
    /// Validates that `order` has no duplicates and only indices `< n`.
    pub fn new(order: Vec<usize>, n: usize) -> Result<Self> {
        let mut seen = vec![false; n];
        for (pos, &i) in order.iter().enumerate() {
            if i >= n {
                return Err(Error::InvalidRanking(format!(
                    "position {pos} holds index {i}, pool has {n} candidates"
                )));
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::InvalidRanking(format!(
                    "candidate {i} appears twice (second time at position {pos})"
                )));
            }
        }
        Ok(Self(order))
    }

    /// For orders built by the policies themselves.
    pub(crate) fn from_trusted(order: Vec<usize>) -> Self {
        debug_assert!({
            let n = order.iter().max().map_or(0, |m| m + 1);
            Ranking::new(order.clone(), n).is_ok()
        });
        Self(order)
    }

    pub fn identity(n: usize) -> Self {
        Self((0..n).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<usize> {
        self.0
    }

    pub fn prefix(&self, k: usize) -> Result<&[usize]> {
        self.0.get(..k).ok_or(Error::PrefixOutOfRange {
            k,
            len: self.0.len(),
        })
    }

    /// True when this is a full permutation of a pool of `n` candidates.
    pub fn is_full(&self, n: usize) -> bool {
        self.0.len() == n
    }

    pub fn require_full(&self, n: usize) -> Result<()> {
        if !self.is_full(n) {
            return Err(Error::InvalidRanking(format!(
                "expected a full ranking of {n} candidates, got {}",
                self.0.len()
            )));
        }
        Ok(())
    }

    /// `pos[i]` is the 0-based position of candidate `i`, if ranked.
    pub fn positions(&self, n: usize) -> Vec<Option<usize>> {
        let mut pos = vec![None; n];
        for (p, &i) in self.0.iter().enumerate() {
            pos[i] = Some(p);
        }
        pos
    }
}

impl AsRef<[usize]> for Ranking {
    fn as_ref(&self) -> &[usize] {
        &self.0
    }
}
