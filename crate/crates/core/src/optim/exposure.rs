//! Exposure-based baselines: the doubly stochastic ranking LP that gives
//! every group exposure proportional to its expected relevance, and
//! sampling of deterministic rankings from its solution.

use rand::RngCore;

use super::simplex::{LinearProgram, LpStatus, Relation};
use crate::cost::InclusionEstimate;
use crate::error::{Error, Result};
use crate::numeric::KahanSum;
use crate::pool::{CandidatePool, Mode};
use crate::ranking::Ranking;
use crate::rng::uniform53;

/// Largest pool the dense exposure LP accepts.
pub const EXPOSURE_MAX_N: usize = 100;

/// Support threshold used when decomposing into permutations.
const SUPPORT_TOL: f64 = 1e-9;

/// Position discount `1/log₂(j + 1)` for 1-based position `j`.
pub fn position_weight(j: usize) -> f64 {
    1.0 / ((j + 1) as f64).log2()
}

/// `Σ[i][j]`: probability that candidate `i` is placed at position `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct DoublyStochasticRanking {
    n: usize,
    sigma: Vec<f64>,
    weights: Vec<f64>,
    objective: f64,
    violation: f64,
}

impl DoublyStochasticRanking {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.sigma[i * self.n + j]
    }

    /// Row-major `n × n` matrix.
    pub fn matrix(&self) -> &[f64] {
        &self.sigma
    }

    /// Position weights `v_j`, 0-based.
    pub fn position_weights(&self) -> &[f64] {
        &self.weights
    }

    /// LP objective `PᵀΣv`.
    pub fn objective(&self) -> f64 {
        self.objective
    }

    /// Smallest achievable violation of the exposure rows; 0 when they
    /// hold exactly.
    pub fn violation(&self) -> f64 {
        self.violation
    }

    pub fn is_relaxed(&self) -> bool {
        self.violation > 0.0
    }

    /// Largest deviation of any row or column sum from 1.
    pub fn stochasticity_residual(&self) -> f64 {
        let n = self.n;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            let row: KahanSum = (0..n).map(|j| self.get(i, j)).collect();
            let col: KahanSum = (0..n).map(|j| self.get(j, i)).collect();
            worst = worst.max((row.value() - 1.0).abs()).max((col.value() - 1.0).abs());
        }
        worst
    }

    /// Expected exposure `Σ_{i∈g} Σ_j Σ[i][j] v_j` of each group.
    pub fn group_exposure(&self, pool: &CandidatePool) -> Vec<f64> {
        let mut acc = vec![KahanSum::new(); pool.group_count()];
        for i in 0..self.n {
            let e: KahanSum = (0..self.n).map(|j| self.get(i, j) * self.weights[j]).collect();
            acc[pool.group_of(i)].add(e.value());
        }
        acc.iter().map(KahanSum::value).collect()
    }

    /// Largest pairwise gap in exposure per unit of expected relevance.
    pub fn exposure_residual(&self, pool: &CandidatePool) -> Result<f64> {
        let rel = pool.relevance(Mode::Probs)?;
        let per_rel: Vec<f64> = self
            .group_exposure(pool)
            .iter()
            .enumerate()
            .map(|(g, e)| e / rel.n_rel(g))
            .collect();
        Ok(crate::delta::spread(per_rel))
    }

    /// Inclusion probabilities `P(i ∈ σ_k) = Σ_{j ≤ k} Σ[i][j]`.
    pub fn inclusion(&self) -> InclusionEstimate {
        InclusionEstimate::from_position_matrix(self.n, &self.sigma)
            .expect("matrix has n² entries")
    }

    /// Writes the matrix as a convex combination of permutation matrices.
    pub fn decompose(&self) -> Result<BirkhoffDecomposition> {
        birkhoff(self.n, &self.sigma)
    }
}

/// Slack allowed above the smallest achievable exposure violation when
/// the exact constraint cannot be met.
const RELAX_TOL: f64 = 1e-9;

/// Solves `max PᵀΣv` over doubly stochastic `Σ` with
/// `Exposure(g)/nRel(g)` equal across consecutive groups.
///
/// Equal exposure per unit of relevance is not always reachable: a small
/// group cannot collect more exposure than its members get from the top
/// positions. In that case the largest violation `t` of the exposure rows
/// is minimized first and utility is maximized among matrices within `t`;
/// [`DoublyStochasticRanking::violation`] reports that `t`.
pub fn exposure_lp(pool: &CandidatePool) -> Result<DoublyStochasticRanking> {
    let rel = pool.relevance(Mode::Probs)?;
    let n = pool.len();
    if n > EXPOSURE_MAX_N {
        return Err(Error::TooLarge {
            n,
            limit: EXPOSURE_MAX_N,
        });
    }
    let weights: Vec<f64> = (1..=n).map(position_weight).collect();
    let utility: Vec<f64> = (0..n)
        .flat_map(|i| weights.iter().map(move |v| pool.prob(i) * v))
        .collect();
    let exposure_rows: Vec<Vec<(usize, f64)>> = (0..rel.group_count() - 1)
        .map(|g| {
            let h = g + 1;
            (0..n)
                .flat_map(|i| {
                    let gi = pool.group_of(i);
                    let scale = if gi == g {
                        1.0 / rel.n_rel(g)
                    } else if gi == h {
                        -1.0 / rel.n_rel(h)
                    } else {
                        0.0
                    };
                    weights.iter().enumerate().map(move |(j, v)| (i * n + j, scale * v))
                })
                .filter(|&(_, c)| c != 0.0)
                .collect()
        })
        .collect();

    // Variables: Σ row-major, then (relaxed only) the violation t.
    let build = |objective: Vec<f64>, relaxed: bool| {
        let mut lp = LinearProgram::new(objective);
        for i in 0..n {
            lp.add_sparse((0..n).map(|j| (i * n + j, 1.0)), Relation::Eq, 1.0);
        }
        for j in 0..n {
            lp.add_sparse((0..n).map(|i| (i * n + j, 1.0)), Relation::Eq, 1.0);
        }
        for row in &exposure_rows {
            if relaxed {
                let t = n * n;
                lp.add_sparse(row.iter().copied().chain([(t, -1.0)]), Relation::Le, 0.0);
                lp.add_sparse(
                    row.iter().map(|&(j, c)| (j, -c)).chain([(t, -1.0)]),
                    Relation::Le,
                    0.0,
                );
            } else {
                lp.add_sparse(row.iter().copied(), Relation::Eq, 0.0);
            }
        }
        lp
    };

    let exact = build(utility.clone(), false).solve()?;
    let (solution, violation) = match exact.status {
        LpStatus::Optimal => (exact, 0.0),
        LpStatus::Unbounded => return Err(unbounded()),
        LpStatus::Infeasible => {
            let mut least = vec![0.0; n * n + 1];
            least[n * n] = -1.0;
            let stage1 = build(least, true).solve()?;
            if stage1.status != LpStatus::Optimal {
                return Err(Error::NumericalFailure(
                    "exposure violation LP did not solve".into(),
                ));
            }
            let t = stage1.x[n * n].max(0.0);
            let mut objective = utility.clone();
            objective.push(0.0);
            let mut lp = build(objective, true);
            lp.set_bounds(n * n, 0.0, t + RELAX_TOL * (1.0 + t));
            let mut stage2 = lp.solve()?;
            match stage2.status {
                LpStatus::Optimal => {}
                LpStatus::Infeasible => return Err(Error::Infeasible),
                LpStatus::Unbounded => return Err(unbounded()),
            }
            stage2.x.truncate(n * n);
            (stage2, t)
        }
    };
    let sigma = solution.x.iter().map(|v| v.clamp(0.0, 1.0)).collect();
    Ok(DoublyStochasticRanking {
        n,
        sigma,
        weights,
        objective: solution.objective_value,
        violation,
    })
}

fn unbounded() -> Error {
    Error::NumericalFailure("exposure LP reported unbounded".into())
}

/// A convex combination of permutations, each stored as a ranking.
#[derive(Debug, Clone, PartialEq)]
pub struct BirkhoffDecomposition {
    terms: Vec<(f64, Ranking)>,
}

impl BirkhoffDecomposition {
    pub fn terms(&self) -> &[(f64, Ranking)] {
        &self.terms
    }

    /// Draws one ranking with probability equal to its weight.
    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> Ranking {
        let u = uniform53(rng);
        let mut acc = 0.0;
        for (w, r) in &self.terms {
            acc += w;
            if u < acc {
                return r.clone();
            }
        }
        self.terms.last().expect("decomposition is nonempty").1.clone()
    }
}

fn birkhoff(n: usize, sigma: &[f64]) -> Result<BirkhoffDecomposition> {
    let mut residual = sigma.to_vec();
    let mut terms = Vec::new();
    let mut covered = 0.0;
    while covered < 1.0 - SUPPORT_TOL && terms.len() <= n * n {
        let Some(matching) = perfect_matching(n, &residual) else {
            break;
        };
        let w = (0..n)
            .map(|i| residual[i * n + matching[i]])
            .fold(f64::INFINITY, f64::min);
        for i in 0..n {
            residual[i * n + matching[i]] -= w;
        }
        let mut order = vec![0; n];
        for (i, &j) in matching.iter().enumerate() {
            order[j] = i;
        }
        terms.push((w, Ranking::from_trusted(order)));
        covered += w;
    }
    if terms.is_empty() || covered < 1.0 - 1e-6 {
        return Err(Error::NumericalFailure(format!(
            "permutation decomposition covered only {covered} of the mass"
        )));
    }
    for t in &mut terms {
        t.0 /= covered;
    }
    Ok(BirkhoffDecomposition { terms })
}

/// Perfect matching of rows to columns on entries above the support
/// threshold (augmenting paths). `result[i]` is the column of row `i`.
fn perfect_matching(n: usize, m: &[f64]) -> Option<Vec<usize>> {
    let adj: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..n).filter(|&j| m[i * n + j] > SUPPORT_TOL).collect())
        .collect();
    let mut col_owner: Vec<Option<usize>> = vec![None; n];
    fn augment(
        i: usize,
        adj: &[Vec<usize>],
        seen: &mut [bool],
        col_owner: &mut [Option<usize>],
    ) -> bool {
        for &j in &adj[i] {
            if seen[j] {
                continue;
            }
            seen[j] = true;
            if col_owner[j].is_none_or(|o| augment(o, adj, seen, col_owner)) {
                col_owner[j] = Some(i);
                return true;
            }
        }
        false
    }
    for i in 0..n {
        let mut seen = vec![false; n];
        if !augment(i, &adj, &mut seen, &mut col_owner) {
            return None;
        }
    }
    let mut row_col = vec![0; n];
    for (j, owner) in col_owner.iter().enumerate() {
        row_col[owner.expect("perfect matching covers every column")] = j;
    }
    Some(row_col)
}
