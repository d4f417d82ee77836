//! Dense two-phase tableau simplex for small linear programs.
//!
//! Variables are shifted and split so the tableau only sees `y ≥ 0`;
//! finite upper bounds become explicit rows. Entering columns are priced
//! by largest reduced cost until a run of degenerate pivots is seen, after
//! which Bland's rule takes over for the rest of the solve.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::KahanSum;

pub const PIVOT_TOL: f64 = 1e-11;
pub const FEAS_TOL: f64 = 1e-8;
pub const OPT_TOL: f64 = 1e-9;
const DEGENERATE_RUN: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

/// `maximize c·x` subject to linear rows and per-variable bounds. Bounds
/// default to `[0, ∞)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    objective: Vec<f64>,
    constraints: Vec<Constraint>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective_value: f64,
    pub iterations: usize,
}

impl LinearProgram {
    pub fn new(objective: Vec<f64>) -> Self {
        let n = objective.len();
        Self {
            objective,
            constraints: Vec::new(),
            lower: vec![0.0; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn bounds(&self, j: usize) -> (f64, f64) {
        (self.lower[j], self.upper[j])
    }

    pub fn add_constraint(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) -> &mut Self {
        self.constraints.push(Constraint {
            coeffs,
            relation,
            rhs,
        });
        self
    }

    /// Adds `Σ coeff·x_j` over the given `(j, coeff)` pairs.
    pub fn add_sparse(
        &mut self,
        terms: impl IntoIterator<Item = (usize, f64)>,
        relation: Relation,
        rhs: f64,
    ) -> &mut Self {
        let mut coeffs = vec![0.0; self.num_vars()];
        for (j, c) in terms {
            coeffs[j] += c;
        }
        self.add_constraint(coeffs, relation, rhs)
    }

    pub fn set_bounds(&mut self, j: usize, lo: f64, hi: f64) -> &mut Self {
        self.lower[j] = lo;
        self.upper[j] = hi;
        self
    }

    fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter("objective must be finite".into()));
        }
        for (r, c) in self.constraints.iter().enumerate() {
            if c.coeffs.len() != n {
                return Err(Error::InvalidParameter(format!(
                    "constraint {r} has {} coefficients, expected {n}",
                    c.coeffs.len()
                )));
            }
            if !c.rhs.is_finite() || c.coeffs.iter().any(|a| !a.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "constraint {r} has non-finite data"
                )));
            }
        }
        for j in 0..n {
            let (lo, hi) = (self.lower[j], self.upper[j]);
            if lo.is_nan() || hi.is_nan() || lo > hi || lo == f64::INFINITY || hi == f64::NEG_INFINITY
            {
                return Err(Error::InvalidParameter(format!(
                    "variable {j} has invalid bounds [{lo}, {hi}]"
                )));
            }
        }
        Ok(())
    }

    /// Largest violation of any row or bound at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for c in &self.constraints {
            let lhs: KahanSum = c.coeffs.iter().zip(x).map(|(a, v)| a * v).collect();
            let d = lhs.value() - c.rhs;
            let v = match c.relation {
                Relation::Le => d.max(0.0),
                Relation::Ge => (-d).max(0.0),
                Relation::Eq => d.abs(),
            };
            worst = worst.max(v);
        }
        for (j, &v) in x.iter().enumerate() {
            worst = worst.max(self.lower[j] - v).max(v - self.upper[j]);
        }
        worst
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.objective
            .iter()
            .zip(x)
            .map(|(c, v)| c * v)
            .collect::<KahanSum>()
            .value()
    }

    pub fn solve(&self) -> Result<LpSolution> {
        simplex_solve(self)
    }
}

const POLISH_REL_TOL: f64 = 1e-14;
const POLISH_MAX_PIVOTS: usize = 1000;

/// How an original variable is expressed in tableau columns.
#[derive(Debug, Clone, Copy)]
enum VarMap {
    /// `x = lo + y`
    Shift { col: usize, lo: f64 },
    /// `x = hi − y`
    Mirror { col: usize, hi: f64 },
    /// `x = y⁺ − y⁻`
    Free { pos: usize, neg: usize },
}

struct Tableau {
    /// Row-major `rows × (cols + 1)`, last entry of each row is the rhs.
    a: Vec<f64>,
    rows: usize,
    cols: usize,
    basis: Vec<usize>,
    /// Original row index of each tableau row.
    row_ids: Vec<usize>,
    /// Reduced costs, last entry holds minus the objective value.
    obj: Vec<f64>,
    iterations: usize,
    degenerate_run: usize,
    bland: bool,
    /// Entering threshold on reduced costs.
    opt_tol: f64,
}

enum StepOutcome {
    Optimal,
    Unbounded,
    Pivoted,
}

impl Tableau {
    fn width(&self) -> usize {
        self.cols + 1
    }

    fn at(&self, r: usize, c: usize) -> f64 {
        self.a[r * self.width() + c]
    }

    fn rhs(&self, r: usize) -> f64 {
        self.at(r, self.cols)
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let w = self.width();
        let inv = 1.0 / self.a[pr * w + pc];
        for c in 0..w {
            self.a[pr * w + c] *= inv;
        }
        self.a[pr * w + pc] = 1.0;
        let pivot_row: Vec<f64> = self.a[pr * w..(pr + 1) * w].to_vec();
        for r in 0..self.rows {
            if r == pr {
                continue;
            }
            let f = self.a[r * w + pc];
            if f != 0.0 {
                let row = &mut self.a[r * w..(r + 1) * w];
                for (x, &p) in row.iter_mut().zip(&pivot_row) {
                    *x -= f * p;
                }
                row[pc] = 0.0;
            }
        }
        let f = self.obj[pc];
        if f != 0.0 {
            for (x, &p) in self.obj.iter_mut().zip(&pivot_row) {
                *x -= f * p;
            }
            self.obj[pc] = 0.0;
        }
        self.basis[pr] = pc;
        self.iterations += 1;
    }

    /// Entering column among `allowed` columns, or `None` at optimality.
    fn entering(&self, allowed: usize) -> Option<usize> {
        if self.bland {
            (0..allowed).find(|&c| self.obj[c] > self.opt_tol)
        } else {
            let mut best = None;
            let mut best_val = self.opt_tol;
            for c in 0..allowed {
                if self.obj[c] > best_val {
                    best_val = self.obj[c];
                    best = Some(c);
                }
            }
            best
        }
    }

    fn leaving(&self, pc: usize) -> Option<usize> {
        let mut best: Option<(usize, f64, f64)> = None;
        for r in 0..self.rows {
            let a = self.at(r, pc);
            if a <= PIVOT_TOL {
                continue;
            }
            let ratio = self.rhs(r).max(0.0) / a;
            let better = match best {
                None => true,
                Some((br, bratio, ba)) => {
                    let tie = (ratio - bratio).abs() <= 1e-12 * (1.0 + bratio.abs());
                    if tie {
                        if self.bland {
                            self.basis[r] < self.basis[br]
                        } else {
                            a > ba
                        }
                    } else {
                        ratio < bratio
                    }
                }
            };
            if better {
                best = Some((r, ratio, a));
            }
        }
        best.map(|(r, _, _)| r)
    }

    fn step(&mut self, allowed: usize) -> StepOutcome {
        let Some(pc) = self.entering(allowed) else {
            return StepOutcome::Optimal;
        };
        let Some(pr) = self.leaving(pc) else {
            return StepOutcome::Unbounded;
        };
        if self.rhs(pr).abs() <= FEAS_TOL {
            self.degenerate_run += 1;
            if self.degenerate_run >= DEGENERATE_RUN {
                self.bland = true;
            }
        } else {
            self.degenerate_run = 0;
        }
        self.pivot(pr, pc);
        StepOutcome::Pivoted
    }

    fn run(&mut self, allowed: usize, limit: usize) -> Result<StepOutcome> {
        loop {
            if self.iterations >= limit {
                return Err(Error::NumericalFailure(format!(
                    "simplex exceeded {limit} iterations"
                )));
            }
            match self.step(allowed) {
                StepOutcome::Pivoted => continue,
                done => return Ok(done),
            }
        }
    }

    fn set_objective(&mut self, costs: &[f64]) {
        self.obj = vec![0.0; self.width()];
        self.obj[..costs.len()].copy_from_slice(costs);
        let w = self.width();
        for r in 0..self.rows {
            let cb = self.obj[self.basis[r]];
            if cb != 0.0 {
                for c in 0..w {
                    self.obj[c] -= cb * self.a[r * w + c];
                }
            }
        }
    }

    fn drop_row(&mut self, r: usize) {
        let w = self.width();
        self.a.drain(r * w..(r + 1) * w);
        self.basis.remove(r);
        self.row_ids.remove(r);
        self.rows -= 1;
    }

    /// Removes columns `keep..cols`.
    fn truncate_cols(&mut self, keep: usize) {
        let w = self.width();
        let mut a = Vec::with_capacity(self.rows * (keep + 1));
        for r in 0..self.rows {
            a.extend_from_slice(&self.a[r * w..r * w + keep]);
            a.push(self.a[r * w + self.cols]);
        }
        self.a = a;
        self.cols = keep;
    }
}

/// Solves a linear program with the two-phase simplex method.
pub fn simplex_solve(lp: &LinearProgram) -> Result<LpSolution> {
    lp.validate()?;
    let n = lp.num_vars();

    // Map original variables to nonnegative tableau columns.
    let mut maps = Vec::with_capacity(n);
    let mut ncols = 0;
    let mut upper_rows: Vec<(usize, f64)> = Vec::new();
    for j in 0..n {
        let (lo, hi) = (lp.lower[j], lp.upper[j]);
        let map = if lo.is_finite() {
            if hi.is_finite() {
                upper_rows.push((ncols, hi - lo));
            }
            VarMap::Shift { col: ncols, lo }
        } else if hi.is_finite() {
            VarMap::Mirror { col: ncols, hi }
        } else {
            ncols += 1;
            VarMap::Free {
                pos: ncols - 1,
                neg: ncols,
            }
        };
        ncols += 1;
        maps.push(map);
    }
    let structural = ncols;

    // Rows in structural columns with rhs adjusted for the shifts.
    let mut rows: Vec<(Vec<f64>, Relation, f64)> = Vec::new();
    for c in &lp.constraints {
        let mut coeffs = vec![0.0; structural];
        let mut rhs = KahanSum::new();
        rhs.add(c.rhs);
        for (j, &a) in c.coeffs.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            match maps[j] {
                VarMap::Shift { col, lo } => {
                    coeffs[col] += a;
                    rhs.add(-a * lo);
                }
                VarMap::Mirror { col, hi } => {
                    coeffs[col] -= a;
                    rhs.add(-a * hi);
                }
                VarMap::Free { pos, neg } => {
                    coeffs[pos] += a;
                    coeffs[neg] -= a;
                }
            }
        }
        rows.push((coeffs, c.relation, rhs.value()));
    }
    for &(col, cap) in &upper_rows {
        let mut coeffs = vec![0.0; structural];
        coeffs[col] = 1.0;
        rows.push((coeffs, Relation::Le, cap));
    }
    for (coeffs, rel, rhs) in &mut rows {
        if *rhs < 0.0 {
            coeffs.iter_mut().for_each(|a| *a = -*a);
            *rhs = -*rhs;
            *rel = match *rel {
                Relation::Le => Relation::Ge,
                Relation::Ge => Relation::Le,
                Relation::Eq => Relation::Eq,
            };
        }
    }

    let m = rows.len();
    let slacks = rows.iter().filter(|r| r.1 != Relation::Eq).count();
    let artificials = rows.iter().filter(|r| r.1 != Relation::Le).count();
    let cols = structural + slacks + artificials;
    let w = cols + 1;
    let mut a = vec![0.0; m * w];
    let mut basis = vec![0; m];
    let mut next_slack = structural;
    let mut next_art = structural + slacks;
    for (r, (coeffs, rel, rhs)) in rows.iter().enumerate() {
        a[r * w..r * w + structural].copy_from_slice(coeffs);
        a[r * w + cols] = *rhs;
        match rel {
            Relation::Le => {
                a[r * w + next_slack] = 1.0;
                basis[r] = next_slack;
                next_slack += 1;
            }
            Relation::Ge => {
                a[r * w + next_slack] = -1.0;
                next_slack += 1;
                a[r * w + next_art] = 1.0;
                basis[r] = next_art;
                next_art += 1;
            }
            Relation::Eq => {
                a[r * w + next_art] = 1.0;
                basis[r] = next_art;
                next_art += 1;
            }
        }
    }

    let original = a.clone();
    let mut t = Tableau {
        a,
        rows: m,
        cols,
        basis,
        row_ids: (0..m).collect(),
        obj: Vec::new(),
        iterations: 0,
        degenerate_run: 0,
        bland: false,
        opt_tol: OPT_TOL,
    };
    let limit = 50_000 + 200 * (m + cols);
    let first_art = structural + slacks;

    if artificials > 0 {
        let mut phase1 = vec![0.0; cols];
        phase1[first_art..].iter_mut().for_each(|c| *c = -1.0);
        t.set_objective(&phase1);
        t.run(cols, limit)?;
        let infeasibility = t.obj[cols];
        if infeasibility > FEAS_TOL {
            return Ok(LpSolution {
                status: LpStatus::Infeasible,
                x: vec![f64::NAN; n],
                objective_value: f64::NAN,
                iterations: t.iterations,
            });
        }
        // Drive remaining artificials out of the basis, or drop their
        // rows as redundant.
        let mut r = 0;
        while r < t.rows {
            if t.basis[r] >= first_art {
                let col = (0..first_art)
                    .filter(|&c| t.at(r, c).abs() > PIVOT_TOL)
                    .max_by(|&x, &y| t.at(r, x).abs().total_cmp(&t.at(r, y).abs()));
                match col {
                    Some(c) => t.pivot(r, c),
                    None => {
                        t.drop_row(r);
                        continue;
                    }
                }
            }
            r += 1;
        }
        t.truncate_cols(first_art);
        t.degenerate_run = 0;
        t.bland = false;
    }

    let mut costs = vec![0.0; t.cols];
    for (j, map) in maps.iter().enumerate() {
        let c = lp.objective[j];
        match *map {
            VarMap::Shift { col, .. } => costs[col] += c,
            VarMap::Mirror { col, .. } => costs[col] -= c,
            VarMap::Free { pos, neg } => {
                costs[pos] += c;
                costs[neg] -= c;
            }
        }
    }
    t.set_objective(&costs);
    let allowed = t.cols;
    if let StepOutcome::Unbounded = t.run(allowed, limit)? {
        return Ok(LpSolution {
            status: LpStatus::Unbounded,
            x: vec![f64::NAN; n],
            objective_value: f64::INFINITY,
            iterations: t.iterations,
        });
    }
    // Columns whose objective coefficient is itself below the optimality
    // tolerance are never priced in above. A short pass with a threshold
    // relative to the cost scale picks them up; it only moves between
    // feasible bases, so hitting its cap or a spurious ray is harmless.
    let scale = costs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    if scale > 0.0 {
        t.opt_tol = POLISH_REL_TOL * scale;
        t.bland = false;
        t.degenerate_run = 0;
        let cap = t.iterations + POLISH_MAX_PIVOTS;
        let _ = t.run(allowed, cap);
    }

    let mut y = vec![0.0; t.cols];
    let basic = refine_basic_solution(&t, &original, w)
        .unwrap_or_else(|| (0..t.rows).map(|r| t.rhs(r)).collect());
    for (r, v) in basic.into_iter().enumerate() {
        y[t.basis[r]] = v.max(0.0);
    }
    let x: Vec<f64> = maps
        .iter()
        .map(|map| match *map {
            VarMap::Shift { col, lo } => lo + y[col],
            VarMap::Mirror { col, hi } => hi - y[col],
            VarMap::Free { pos, neg } => y[pos] - y[neg],
        })
        .collect();
    let violation = lp.max_violation(&x);
    if violation > FEAS_TOL * (1.0 + max_abs_rhs(lp)) {
        return Err(Error::NumericalFailure(format!(
            "simplex solution violates constraints by {violation:e}"
        )));
    }
    Ok(LpSolution {
        status: LpStatus::Optimal,
        objective_value: lp.evaluate(&x),
        x,
        iterations: t.iterations,
    })
}

/// Re-solves `B x_B = b` for the final basis against the untouched
/// constraint matrix, removing the round-off the pivots accumulated in the
/// tableau's rhs. `None` when the basis looks singular or the result
/// strays from the tableau values.
fn refine_basic_solution(t: &Tableau, original: &[f64], width: usize) -> Option<Vec<f64>> {
    let m = t.rows;
    let rhs_col = width - 1;
    let mut aug = vec![0.0; m * (m + 1)];
    for (i, &row) in t.row_ids.iter().enumerate() {
        for (j, &col) in t.basis.iter().enumerate() {
            aug[i * (m + 1) + j] = original[row * width + col];
        }
        aug[i * (m + 1) + m] = original[row * width + rhs_col];
    }
    let at = |aug: &[f64], r: usize, c: usize| aug[r * (m + 1) + c];
    for c in 0..m {
        let p = (c..m).max_by(|&x, &y| at(&aug, x, c).abs().total_cmp(&at(&aug, y, c).abs()))?;
        if at(&aug, p, c).abs() < 1e-12 {
            return None;
        }
        if p != c {
            for k in 0..=m {
                aug.swap(p * (m + 1) + k, c * (m + 1) + k);
            }
        }
        let piv = at(&aug, c, c);
        for r in c + 1..m {
            let f = at(&aug, r, c) / piv;
            if f != 0.0 {
                for k in c..=m {
                    aug[r * (m + 1) + k] -= f * aug[c * (m + 1) + k];
                }
            }
        }
    }
    let mut x = vec![0.0; m];
    for r in (0..m).rev() {
        let mut acc = KahanSum::new();
        acc.add(at(&aug, r, m));
        for c in r + 1..m {
            acc.add(-at(&aug, r, c) * x[c]);
        }
        x[r] = acc.value() / at(&aug, r, r);
    }
    let consistent = x
        .iter()
        .enumerate()
        .all(|(r, &v)| v >= -FEAS_TOL && (v - t.rhs(r)).abs() <= 1e-6 * (1.0 + v.abs()));
    consistent.then_some(x)
}

fn max_abs_rhs(lp: &LinearProgram) -> f64 {
    lp.constraints.iter().fold(0.0, |m, c| m.max(c.rhs.abs()))
}
