//! Representation-quota baselines: proportional Rooney rule and FA*IR.
//! Both walk the PRP order and insert the protected group's best
//! remaining candidate whenever the per-prefix quota would otherwise fail.

use super::GroupQueues;
use crate::error::{Error, Result};
use crate::pool::CandidatePool;
use crate::ranking::Ranking;

#[derive(Debug, Clone, PartialEq)]
pub struct PrrOutcome {
    pub ranking: Ranking,
    /// Set when the quota bound while the protected queue was empty.
    pub violated: bool,
}

/// Walks PRP order while keeping `S(B|σ_k)/k ≥ S(B)/n` at every prefix,
/// where B is the protected group.
pub fn prr_ranking(pool: &CandidatePool, protected: usize) -> Result<PrrOutcome> {
    pool.require_groups(2)?;
    check_protected(pool, protected)?;
    let n = pool.len() as u128;
    let share = pool.group_sizes()[protected] as u128;
    let mut queues = GroupQueues::new(pool);
    let mut order = Vec::with_capacity(pool.len());
    let mut violated = false;

    for k in 1..=pool.len() {
        let (mut g, _) = queues.best_head(pool).expect("candidates remain");
        if g != protected {
            // Count stays the same if a non-protected candidate is taken.
            let count = queues.taken(protected) as u128;
            if count * n < share * k as u128 {
                if queues.is_exhausted(protected) {
                    violated = true;
                } else {
                    g = protected;
                }
            }
        }
        order.push(queues.pop(g).expect("chosen queue has a head"));
    }
    Ok(PrrOutcome {
        ranking: Ranking::from_trusted(order),
        violated,
    })
}

fn check_protected(pool: &CandidatePool, protected: usize) -> Result<()> {
    if protected >= pool.group_count() {
        return Err(Error::InvalidParameter(format!(
            "protected group {protected} does not exist"
        )));
    }
    Ok(())
}

/// `P(X ≤ m)` for `X ~ Binomial(k, p)`, summed in log space.
pub fn binomial_cdf(m: usize, k: usize, p: f64) -> f64 {
    if m >= k {
        return 1.0;
    }
    if p <= 0.0 {
        return 1.0;
    }
    if p >= 1.0 {
        return 0.0;
    }
    let (lp, lq) = (p.ln(), (-p).ln_1p());
    let mut ln_choose = 0.0;
    let mut total = 0.0;
    for j in 0..=m {
        if j > 0 {
            ln_choose += ((k - j + 1) as f64).ln() - (j as f64).ln();
        }
        total += (ln_choose + j as f64 * lp + (k - j) as f64 * lq).exp();
    }
    total.min(1.0)
}

/// Minimum protected counts `m(k)` for `k = 1..=k_max` (entry `k − 1`):
/// the smallest `m` with `BinomialCDF(m; k, p) > alpha`.
pub fn fairstar_minima(k_max: usize, p: f64, alpha: f64) -> Result<Vec<usize>> {
    if !(p > 0.0 && p < 1.0) || !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "FA*IR needs p and alpha in (0, 1), got p={p}, alpha={alpha}"
        )));
    }
    let mut minima = Vec::with_capacity(k_max);
    let mut m = 0;
    for k in 1..=k_max {
        // m(k) ≥ m(k−1) because the CDF at fixed m decreases in k.
        while binomial_cdf(m, k, p) <= alpha {
            m += 1;
        }
        minima.push(m);
    }
    Ok(minima)
}

/// FA*IR: PRP order with the protected group's head inserted whenever its
/// count would fall below the binomial minimum, `p = S(protected)/n`.
pub fn fairstar_ranking(pool: &CandidatePool, protected: usize, alpha: f64) -> Result<Ranking> {
    pool.require_groups(2)?;
    check_protected(pool, protected)?;
    let p = pool.group_sizes()[protected] as f64 / pool.len() as f64;
    let minima = fairstar_minima(pool.len(), p, alpha)?;
    let mut queues = GroupQueues::new(pool);
    let mut order = Vec::with_capacity(pool.len());
    for &m in &minima {
        let g = if queues.taken(protected) < m && !queues.is_exhausted(protected) {
            protected
        } else {
            queues.best_head(pool).expect("candidates remain").0
        };
        order.push(queues.pop(g).expect("chosen queue has a head"));
    }
    Ok(Ranking::from_trusted(order))
}
