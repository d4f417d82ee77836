//! Candidate pools and the per-group relevance totals every fairness
//! quantity is normalized by.

use std::borrow::Cow;
use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::KahanSum;

/// Expected relevance at or below this is treated as degenerate: every
/// fairness formula divides by it.
pub const RELEVANCE_FLOOR: f64 = 1e-9;

/// Which per-candidate relevance the group totals are computed from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Calibrated probabilities `p_i`.
    #[default]
    Probs,
    /// Observed binary labels `r_i`.
    Labels,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "probs" => Ok(Mode::Probs),
            "labels" => Ok(Mode::Labels),
            other => Err(Error::InvalidParameter(format!("unknown mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub id: String,
    pub group: usize,
    pub prob: f64,
    pub label: Option<bool>,
}

impl Candidate {
    pub fn new(id: impl Into<String>, group: usize, prob: f64) -> Self {
        Self {
            id: id.into(),
            group,
            prob,
            label: None,
        }
    }

    pub fn with_label(mut self, label: bool) -> Self {
        self.label = Some(label);
        self
    }
}

/// Candidates with group membership and calibrated relevance
/// probabilities. Immutable once built; candidates are addressed by their
/// dense load-order index.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidatePool {
    ids: Vec<String>,
    groups: Vec<usize>,
    probs: Vec<f64>,
    labels: Option<Vec<bool>>,
    group_names: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GroupStats {
    pub size: usize,
    pub n_rel: f64,
}

impl CandidatePool {
    pub fn new(candidates: Vec<Candidate>, group_names: Vec<String>) -> Result<Self> {
        let g = group_names.len();
        if g == 0 {
            return Err(Error::WrongGroupCount {
                expected: "at least 1".into(),
                found: 0,
            });
        }
        let labeled = candidates.iter().filter(|c| c.label.is_some()).count();
        if labeled != 0 && labeled != candidates.len() {
            return Err(Error::PartialLabels);
        }

        let mut seen = HashSet::with_capacity(candidates.len());
        let mut ids = Vec::with_capacity(candidates.len());
        let mut groups = Vec::with_capacity(candidates.len());
        let mut probs = Vec::with_capacity(candidates.len());
        let mut labels = Vec::with_capacity(if labeled > 0 { candidates.len() } else { 0 });
        for (index, c) in candidates.into_iter().enumerate() {
            if !(0.0..=1.0).contains(&c.prob) {
                return Err(Error::InvalidProbability {
                    index,
                    value: c.prob,
                });
            }
            if c.group >= g {
                return Err(Error::InvalidGroup {
                    index,
                    group: c.group,
                    groups: g,
                });
            }
            if !seen.insert(c.id.clone()) {
                return Err(Error::DuplicateId(c.id));
            }
            ids.push(c.id);
            groups.push(c.group);
            probs.push(c.prob);
            if let Some(l) = c.label {
                labels.push(l);
            }
        }
        Ok(Self {
            ids,
            groups,
            probs,
            labels: (labeled > 0).then_some(labels),
            group_names,
        })
    }

    /// Builds a pool from one probability list per group. Groups are named
    /// `A`, `B`, `C`, ... and candidates `A0`, `A1`, ..., in group order.
    pub fn from_group_probs(groups: &[Vec<f64>]) -> Result<Self> {
        let names: Vec<String> = (0..groups.len()).map(default_group_name).collect();
        let mut candidates = Vec::with_capacity(groups.iter().map(Vec::len).sum());
        for (g, probs) in groups.iter().enumerate() {
            for (j, &p) in probs.iter().enumerate() {
                candidates.push(Candidate::new(format!("{}{}", names[g], j), g, p));
            }
        }
        Self::new(candidates, names)
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn group_count(&self) -> usize {
        self.group_names.len()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, i: usize) -> f64 {
        self.probs[i]
    }

    pub fn groups(&self) -> &[usize] {
        &self.groups
    }

    pub fn group_of(&self, i: usize) -> usize {
        self.groups[i]
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn id(&self, i: usize) -> &str {
        &self.ids[i]
    }

    pub fn labels(&self) -> Option<&[bool]> {
        self.labels.as_deref()
    }

    pub fn group_names(&self) -> &[String] {
        &self.group_names
    }

    pub fn group_name(&self, g: usize) -> &str {
        &self.group_names[g]
    }

    pub fn group_index(&self, name: &str) -> Option<usize> {
        self.group_names.iter().position(|n| n == name)
    }

    /// Indices of the members of group `g` in load order.
    pub fn members(&self, g: usize) -> impl Iterator<Item = usize> + '_ {
        self.groups
            .iter()
            .enumerate()
            .filter(move |&(_, &h)| h == g)
            .map(|(i, _)| i)
    }

    pub fn group_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.group_count()];
        for &g in &self.groups {
            sizes[g] += 1;
        }
        sizes
    }

    /// Size `S(g)` and expected relevance `nRel(g)` of every group.
    pub fn group_stats(&self) -> Result<Vec<GroupStats>> {
        let sizes = self.group_sizes();
        let n_rel = group_totals(&self.groups, &self.probs, self.group_count());
        self.check_groups(&sizes, &n_rel)?;
        Ok(sizes
            .into_iter()
            .zip(n_rel)
            .map(|(size, n_rel)| GroupStats { size, n_rel })
            .collect())
    }

    fn check_groups(&self, sizes: &[usize], n_rel: &[f64]) -> Result<()> {
        for (g, (&size, &rel)) in sizes.iter().zip(n_rel).enumerate() {
            if size == 0 {
                return Err(Error::EmptyGroup {
                    group: self.group_names[g].clone(),
                });
            }
            if rel <= RELEVANCE_FLOOR {
                return Err(Error::DegenerateRelevance {
                    group: self.group_names[g].clone(),
                    n_rel: rel,
                });
            }
        }
        Ok(())
    }

    pub fn require_groups(&self, expected: usize) -> Result<()> {
        if self.group_count() != expected {
            return Err(Error::WrongGroupCount {
                expected: expected.to_string(),
                found: self.group_count(),
            });
        }
        Ok(())
    }

    pub fn require_fairness_groups(&self) -> Result<()> {
        if self.group_count() < 2 {
            return Err(Error::WrongGroupCount {
                expected: "at least 2".into(),
                found: self.group_count(),
            });
        }
        Ok(())
    }

    /// Copy of the pool with group `g` renamed to position `perm[g]`.
    pub fn relabel_groups(&self, perm: &[usize]) -> Result<Self> {
        let g = self.group_count();
        let mut check = perm.to_vec();
        check.sort_unstable();
        if perm.len() != g || check.iter().enumerate().any(|(i, &p)| i != p) {
            return Err(Error::InvalidParameter(
                "group relabeling must be a permutation".into(),
            ));
        }
        let mut names = vec![String::new(); g];
        for (old, &new) in perm.iter().enumerate() {
            names[new] = self.group_names[old].clone();
        }
        Ok(Self {
            ids: self.ids.clone(),
            groups: self.groups.iter().map(|&h| perm[h]).collect(),
            probs: self.probs.clone(),
            labels: self.labels.clone(),
            group_names: names,
        })
    }

    pub fn relevance(&self, mode: Mode) -> Result<Relevance<'_>> {
        Relevance::new(self, mode)
    }
}

pub(crate) fn default_group_name(g: usize) -> String {
    if g < 26 {
        char::from(b'A' + g as u8).to_string()
    } else {
        format!("G{g}")
    }
}

fn group_totals(groups: &[usize], weights: &[f64], g: usize) -> Vec<f64> {
    let mut acc = vec![KahanSum::new(); g];
    for (&h, &w) in groups.iter().zip(weights) {
        acc[h].add(w);
    }
    acc.iter().map(KahanSum::value).collect()
}

/// Per-candidate relevance weights (probabilities or labels) and the group
/// totals `nRel(g)` derived from them, validated for fairness use: at least
/// two groups, none empty, none with degenerate relevance.
#[derive(Debug, Clone)]
pub struct Relevance<'a> {
    pool: &'a CandidatePool,
    mode: Mode,
    weights: Cow<'a, [f64]>,
    n_rel: Vec<f64>,
    sizes: Vec<usize>,
    total: f64,
}

impl<'a> Relevance<'a> {
    pub fn new(pool: &'a CandidatePool, mode: Mode) -> Result<Self> {
        pool.require_fairness_groups()?;
        let weights: Cow<'a, [f64]> = match mode {
            Mode::Probs => Cow::Borrowed(pool.probs()),
            Mode::Labels => {
                let labels = pool.labels().ok_or(Error::MissingLabels)?;
                Cow::Owned(labels.iter().map(|&l| f64::from(u8::from(l))).collect())
            }
        };
        let sizes = pool.group_sizes();
        let n_rel = group_totals(pool.groups(), &weights, pool.group_count());
        pool.check_groups(&sizes, &n_rel)?;
        let total = n_rel.iter().copied().collect::<KahanSum>().value();
        Ok(Self {
            pool,
            mode,
            weights,
            n_rel,
            sizes,
            total,
        })
    }

    pub fn pool(&self) -> &'a CandidatePool {
        self.pool
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn n_rel(&self, g: usize) -> f64 {
        self.n_rel[g]
    }

    pub fn n_rels(&self) -> &[f64] {
        &self.n_rel
    }

    pub fn size(&self, g: usize) -> usize {
        self.sizes[g]
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// `Σ_g nRel(g)`.
    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn group_count(&self) -> usize {
        self.n_rel.len()
    }

    /// Normalized share `q_i = w_i / nRel(g(i))`.
    pub fn share(&self, i: usize) -> f64 {
        self.weights[i] / self.n_rel[self.pool.group_of(i)]
    }
}

/// Small two-group pool with equal expected relevance: group A has 17
/// sharply predicted candidates, group B 8 weakly predicted ones.
pub fn running_example() -> CandidatePool {
    let mut a = vec![0.9, 0.9, 0.8, 0.7, 0.1];
    a.extend(std::iter::repeat_n(0.05, 12));
    let b = vec![0.6, 0.6, 0.6, 0.5, 0.5, 0.4, 0.4, 0.4];
    CandidatePool::from_group_probs(&[a, b]).expect("static pool is valid")
}
