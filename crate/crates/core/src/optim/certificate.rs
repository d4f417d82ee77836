//! The LP relaxation of fair top-k selection, and explicit dual points
//! built from an EOR prefix that bound its distance to the optimum.

use serde::Serialize;

use super::ilp::{ilp_top_k, ILP_MAX_N};
use super::simplex::{LinearProgram, LpSolution, LpStatus, Relation};
use crate::delta::spread;
use crate::error::{Error, Result};
use crate::numeric::KahanSum;
use crate::pool::{CandidatePool, Mode, Relevance};
use crate::ranking::Ranking;

/// Tolerance for every certificate check.
pub const CERT_TOL: f64 = 1e-9;

/// `max Σ p_i x_i / Σ nRel` over `0 ≤ x ≤ 1`, `Σ x ≤ k` and, for every
/// ordered group pair `(g, h)`, `Σ_{i∈g} q_i x_i − Σ_{i∈h} q_i x_i ≤ cap`.
pub fn eor_primal_program(pool: &CandidatePool, k: usize, delta_cap: f64) -> Result<LinearProgram> {
    let rel = pool.relevance(Mode::Probs)?;
    let n = pool.len();
    if k > n {
        return Err(Error::PrefixOutOfRange { k, len: n });
    }
    if !(delta_cap >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "delta cap must be nonnegative, got {delta_cap}"
        )));
    }
    let total = rel.total();
    let mut lp = LinearProgram::new(pool.probs().iter().map(|p| p / total).collect());
    for j in 0..n {
        lp.set_bounds(j, 0.0, 1.0);
    }
    lp.add_constraint(vec![1.0; n], Relation::Le, k as f64);
    let g_count = rel.group_count();
    for g in 0..g_count {
        for h in 0..g_count {
            if g == h {
                continue;
            }
            let coeffs = (0..n)
                .map(|i| {
                    let gi = pool.group_of(i);
                    if gi == g {
                        rel.share(i)
                    } else if gi == h {
                        -rel.share(i)
                    } else {
                        0.0
                    }
                })
                .collect();
            lp.add_constraint(coeffs, Relation::Le, delta_cap);
        }
    }
    Ok(lp)
}

pub fn eor_primal_lp(pool: &CandidatePool, k: usize, delta_cap: f64) -> Result<LpSolution> {
    eor_primal_program(pool, k, delta_cap)?.solve()
}

/// Dual point of the fair top-k LP constructed from the EOR prefix of
/// length `k`, with the resulting gap and bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualCertificate {
    pub k: usize,
    pub groups: usize,
    /// The cap used in the primal: `δ(σ_k)` in its nonnegative form.
    pub delta: f64,
    /// Row-major `G × G`; entry `g·G + h` is `λ_{g,h}`, the diagonal is 0.
    pub lambda_pair: Vec<f64>,
    pub lambda_k: f64,
    pub lambda_prime: Vec<f64>,
    /// Per group, the last selected candidate or the first unselected
    /// one if the group has none in the prefix.
    pub anchors: Vec<usize>,
    pub selected: Vec<bool>,
    pub dual_objective: f64,
    /// Primal objective at the EOR prefix.
    pub eor_value: f64,
    /// `dual_objective − eor_value`.
    pub gap: f64,
    pub phi: f64,
    /// `φ·δ`.
    pub bound: f64,
}

impl DualCertificate {
    pub fn lambda(&self, g: usize, h: usize) -> f64 {
        self.lambda_pair[g * self.groups + h]
    }

    /// `Σ_{h≠g} (λ_{g,h} − λ_{h,g})`.
    fn pair_weight(&self, g: usize) -> f64 {
        (0..self.groups)
            .filter(|&h| h != g)
            .map(|h| self.lambda(g, h) - self.lambda(h, g))
            .sum()
    }

    /// Dual objective recomputed from the stored variables.
    pub fn recompute_dual_objective(&self) -> f64 {
        let mut acc = KahanSum::new();
        for &l in &self.lambda_pair {
            acc.add(self.delta * l);
        }
        acc.add(self.k as f64 * self.lambda_k);
        for &l in &self.lambda_prime {
            acc.add(l);
        }
        acc.value()
    }
}

/// Per-group anchor candidates for the prefix `σ_k` of a ranking that
/// keeps each group in PRP order.
fn anchors(pool: &CandidatePool, ranking: &Ranking, k: usize) -> Vec<usize> {
    let g = pool.group_count();
    let mut last: Vec<Option<usize>> = vec![None; g];
    for &i in &ranking.as_slice()[..k] {
        last[pool.group_of(i)] = Some(i);
    }
    let mut first_after: Vec<Option<usize>> = vec![None; g];
    for &i in &ranking.as_slice()[k..] {
        let h = pool.group_of(i);
        if first_after[h].is_none() {
            first_after[h] = Some(i);
        }
    }
    (0..g)
        .map(|h| {
            last[h]
                .or(first_after[h])
                .expect("groups are nonempty")
        })
        .collect()
}

/// Builds the dual point for the prefix of length `k` of an EOR ranking.
pub fn dual_certificate(pool: &CandidatePool, eor_ranking: &Ranking, k: usize) -> Result<DualCertificate> {
    let rel = pool.relevance(Mode::Probs)?;
    build_certificate(&rel, eor_ranking, k)
}

fn build_certificate(rel: &Relevance<'_>, ranking: &Ranking, k: usize) -> Result<DualCertificate> {
    let pool = rel.pool();
    let n = pool.len();
    ranking.require_full(n)?;
    if k == 0 || k > n {
        return Err(Error::InvalidParameter(format!(
            "certificate prefix must satisfy 1 <= k <= {n}, got {k}"
        )));
    }
    let g_count = rel.group_count();
    let total = rel.total();
    let prefix = &ranking.as_slice()[..k];
    let delta = spread(rel.fractions(prefix));

    let anchors = anchors(pool, ranking, k);
    let p: Vec<f64> = anchors.iter().map(|&i| pool.prob(i)).collect();
    let q: Vec<f64> = anchors.iter().map(|&i| rel.share(i)).collect();

    let scale = 1.0 / ((g_count - 1) as f64 * total);
    let mut lambda_pair = vec![0.0; g_count * g_count];
    let mut phi_sum = KahanSum::new();
    for g in 0..g_count {
        for h in g + 1..g_count {
            let denom = q[g] + q[h];
            let t = if denom > 0.0 { (p[g] - p[h]) / denom } else { 0.0 };
            lambda_pair[g * g_count + h] = t.max(0.0) * scale;
            lambda_pair[h * g_count + g] = (-t).max(0.0) * scale;
            phi_sum.add(t.abs());
        }
    }
    let phi = 2.0 * scale * phi_sum.value();

    let mut cert = DualCertificate {
        k,
        groups: g_count,
        delta,
        lambda_pair,
        lambda_k: 0.0,
        lambda_prime: vec![0.0; n],
        anchors,
        selected: vec![false; n],
        dual_objective: 0.0,
        eor_value: 0.0,
        gap: 0.0,
        phi,
        bound: phi * delta,
    };
    let weights: Vec<f64> = (0..g_count).map(|g| cert.pair_weight(g)).collect();

    // For two groups both expressions coincide; with more groups the
    // largest keeps every unselected λ′ at zero.
    cert.lambda_k = (0..g_count)
        .map(|g| p[g] / total - q[g] * weights[g])
        .fold(0.0, f64::max);

    for &i in prefix {
        cert.selected[i] = true;
    }
    for i in 0..n {
        let reduced = pool.prob(i) / total - rel.share(i) * weights[pool.group_of(i)];
        cert.lambda_prime[i] = (reduced - cert.lambda_k).max(0.0);
    }
    cert.dual_objective = cert.recompute_dual_objective();
    cert.eor_value = prefix.iter().map(|&i| pool.prob(i)).collect::<KahanSum>().value() / total;
    cert.gap = cert.dual_objective - cert.eor_value;
    Ok(cert)
}

/// Numerical audit of a certificate against the primal it certifies.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificateReport {
    pub k: usize,
    pub delta: f64,
    pub phi: f64,
    pub bound: f64,
    pub gap: f64,
    pub lp_value: f64,
    /// Exact optimum of the integer problem; absent above the search size
    /// limit.
    pub ilp_value: Option<f64>,
    pub eor_value: f64,
    pub dual_objective: f64,
    /// All dual variables nonnegative and every dual row satisfied.
    pub feasible: bool,
    /// Largest dual-row violation (0 when every row holds).
    pub residual_max: f64,
    /// Most negative dual variable (0 when all are nonnegative).
    pub min_dual: f64,
    /// Largest `λ′_i` over candidates outside the prefix.
    pub max_lambda_prime_unselected: f64,
    pub weak_duality: bool,
    pub gap_nonnegative: bool,
    pub gap_within_pair_bound: bool,
    pub gap_within_bound: bool,
    /// `LP ≥ ILP ≥ EOR` (ILP skipped when absent).
    pub sandwich: bool,
    /// `ILP − EOR ≤ φδ` (vacuous when ILP is absent).
    pub cost_gap_within_bound: bool,
}

impl CertificateReport {
    /// Every check passed.
    pub fn passed(&self) -> bool {
        self.feasible
            && self.max_lambda_prime_unselected <= CERT_TOL
            && self.weak_duality
            && self.gap_nonnegative
            && self.gap_within_pair_bound
            && self.gap_within_bound
            && self.sandwich
            && self.cost_gap_within_bound
    }
}

/// Checks a certificate: dual feasibility, weak duality against the
/// solved LP, and the gap bounds. Failures are reported, not raised.
pub fn verify_certificate(cert: &DualCertificate, pool: &CandidatePool, k: usize) -> Result<CertificateReport> {
    let rel = pool.relevance(Mode::Probs)?;
    let n = pool.len();
    if cert.k != k || cert.lambda_prime.len() != n || cert.groups != rel.group_count() {
        return Err(Error::InvalidParameter(
            "certificate does not match pool and prefix".into(),
        ));
    }
    let total = rel.total();
    let weights: Vec<f64> = (0..cert.groups).map(|g| cert.pair_weight(g)).collect();

    let mut residual_max: f64 = 0.0;
    for i in 0..n {
        let lhs = rel.share(i) * weights[pool.group_of(i)] + cert.lambda_k + cert.lambda_prime[i];
        let residual = lhs - pool.prob(i) / total;
        residual_max = residual_max.max(-residual);
    }
    let min_dual = cert
        .lambda_pair
        .iter()
        .chain(&cert.lambda_prime)
        .chain(std::iter::once(&cert.lambda_k))
        .fold(0.0f64, |m, &v| m.min(v));
    let max_lambda_prime_unselected = (0..n)
        .filter(|&i| !cert.selected[i])
        .map(|i| cert.lambda_prime[i])
        .fold(0.0, f64::max);
    let feasible = min_dual >= 0.0 && residual_max <= CERT_TOL;

    let dual_objective = cert.recompute_dual_objective();
    let gap = dual_objective - cert.eor_value;

    let lp = eor_primal_lp(pool, k, cert.delta)?;
    if lp.status != LpStatus::Optimal {
        return Err(Error::NumericalFailure(format!(
            "fair top-k relaxation reported {:?} although the EOR prefix is feasible",
            lp.status
        )));
    }
    let lp_value = lp.objective_value;
    let ilp_value = if n <= ILP_MAX_N {
        Some(ilp_top_k(pool, k, cert.delta)?.objective)
    } else {
        None
    };

    let pair_total: f64 = cert.lambda_pair.iter().sum();
    let sandwich = match ilp_value {
        Some(ilp) => lp_value >= ilp - CERT_TOL && ilp >= cert.eor_value - CERT_TOL,
        None => lp_value >= cert.eor_value - CERT_TOL,
    };
    let cost_gap_within_bound = ilp_value.is_none_or(|ilp| ilp - cert.eor_value <= cert.bound + CERT_TOL);

    Ok(CertificateReport {
        k,
        delta: cert.delta,
        phi: cert.phi,
        bound: cert.bound,
        gap,
        lp_value,
        ilp_value,
        eor_value: cert.eor_value,
        dual_objective,
        feasible,
        residual_max,
        min_dual,
        max_lambda_prime_unselected,
        weak_duality: dual_objective >= lp_value - CERT_TOL,
        gap_nonnegative: gap >= -CERT_TOL,
        gap_within_pair_bound: gap <= 2.0 * pair_total * cert.delta + CERT_TOL,
        gap_within_bound: gap <= cert.bound + CERT_TOL,
        sandwich,
        cost_gap_within_bound,
    })
}

/// A-priori bound on the EOR slack at any prefix.
pub fn delta_max_bound(pool: &CandidatePool) -> Result<f64> {
    let rel = pool.relevance(Mode::Probs)?;
    let g_count = rel.group_count();
    let mut tops = vec![0.0f64; g_count];
    for (i, &p) in pool.probs().iter().enumerate() {
        let g = pool.group_of(i);
        tops[g] = tops[g].max(p);
    }
    let ratios = (0..g_count).map(|g| tops[g] / rel.n_rel(g));
    if g_count == 2 {
        Ok(0.5 * ratios.sum::<f64>())
    } else {
        Ok(ratios.fold(0.0, f64::max))
    }
}
