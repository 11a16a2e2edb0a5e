//! Dense two-phase simplex.
//!
//! Problems here have at most a few hundred columns, so a full tableau is
//! kept. Entering columns follow Bland's rule; the leaving row comes from a
//! Harris ratio test so that tiny pivots are avoided on degenerate problems,
//! and the tableau is periodically recomputed from the original rows.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-9;
const FEAS_TOL: f64 = 1e-9;
/// A tableau row with no entry above this after phase one is redundant.
const REDUNDANT_TOL: f64 = 1e-7;
const REINVERT_EVERY: usize = 32;
const MAX_PIVOTS: usize = 200_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

/// `maximize c^T x` subject to linear rows, with each variable either
/// nonnegative (the default) or free.
#[derive(Clone, Debug)]
pub struct LinearProgram {
    objective: Vec<f64>,
    free: Vec<bool>,
    rows: Vec<(Vec<f64>, Relation, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, value: f64 },
    Infeasible,
    Unbounded,
}

impl LpOutcome {
    pub fn solution(&self) -> Option<&[f64]> {
        match self {
            LpOutcome::Optimal { x, .. } => Some(x),
            _ => None,
        }
    }
}

impl LinearProgram {
    pub fn new(n: usize) -> Self {
        Self { objective: vec![0.0; n], free: vec![false; n], rows: Vec::new() }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn set_free(&mut self, j: usize) {
        self.free[j] = true;
    }

    pub fn set_objective(&mut self, j: usize, c: f64) {
        self.objective[j] = c;
    }

    pub fn add(&mut self, coeffs: Vec<f64>, rel: Relation, rhs: f64) {
        debug_assert_eq!(coeffs.len(), self.num_vars());
        self.rows.push((coeffs, rel, rhs));
    }

    /// Adds a row given as sparse `(variable, coefficient)` pairs.
    pub fn add_sparse(&mut self, terms: &[(usize, f64)], rel: Relation, rhs: f64) {
        let mut coeffs = vec![0.0; self.num_vars()];
        for &(j, a) in terms {
            coeffs[j] += a;
        }
        self.add(coeffs, rel, rhs);
    }

    pub fn solve(&self) -> Result<LpOutcome> {
        let n = self.num_vars();
        if self.objective.iter().chain(self.rows.iter().flat_map(|r| r.0.iter())).any(|x| !x.is_finite())
            || self.rows.iter().any(|r| !r.2.is_finite())
        {
            return Err(Error::NonFinite("linear program data".into()));
        }

        // Structural columns: one per nonnegative variable, two per free one.
        let mut col_of = Vec::with_capacity(n);
        let mut n_struct = 0;
        for &f in &self.free {
            col_of.push(n_struct);
            n_struct += if f { 2 } else { 1 };
        }
        let n_slack = self.rows.iter().filter(|r| r.1 != Relation::Eq).count();
        let m = self.rows.len();
        let n_real = n_struct + n_slack;
        let width = n_real + m + 1; // + artificials + rhs
        let rhs_col = width - 1;

        let mut tab = vec![vec![0.0; width]; m];
        let mut slack = n_struct;
        for (i, (coeffs, rel, rhs)) in self.rows.iter().enumerate() {
            let row = &mut tab[i];
            for (j, &a) in coeffs.iter().enumerate() {
                row[col_of[j]] += a;
                if self.free[j] {
                    row[col_of[j] + 1] -= a;
                }
            }
            match rel {
                Relation::Le => {
                    row[slack] = 1.0;
                    slack += 1;
                }
                Relation::Ge => {
                    row[slack] = -1.0;
                    slack += 1;
                }
                Relation::Eq => {}
            }
            row[rhs_col] = *rhs;
            if *rhs < 0.0 {
                row.iter_mut().for_each(|x| *x = -*x);
            }
            row[n_real + i] = 1.0;
        }
        let basis: Vec<usize> = (n_real..n_real + m).collect();
        let mut t = Tableau { orig: tab.clone(), kept: (0..m).collect(), tab, basis, pivots: 0 };

        // Phase 1: maximize -sum(artificials).
        let mut cost = vec![0.0; width - 1];
        cost[n_real..n_real + m].iter_mut().for_each(|c| *c = -1.0);
        if !t.run(&cost, n_real)? {
            return Err(Error::Lp("phase one reported unbounded".into()));
        }
        let scale = 1.0 + self.rows.iter().map(|r| r.2.abs()).fold(0.0, f64::max);
        let infeas: f64 = t.basis.iter().zip(&t.tab).filter(|(&b, _)| b >= n_real).map(|(_, row)| row[rhs_col]).sum();
        if infeas > 1e-9 * scale {
            return Ok(LpOutcome::Infeasible);
        }

        // Drive zero-level artificials out of the basis; drop redundant rows.
        let mut i = 0;
        while i < t.tab.len() {
            if t.basis[i] >= n_real {
                let row = &t.tab[i];
                let best = (0..n_real).max_by(|&a, &b| row[a].abs().total_cmp(&row[b].abs()));
                match best.filter(|&j| row[j].abs() > REDUNDANT_TOL) {
                    Some(j) => t.pivot(i, j),
                    None => {
                        t.tab.remove(i);
                        t.basis.remove(i);
                        t.kept.remove(i);
                        continue;
                    }
                }
            }
            i += 1;
        }
        t.reinvert();

        // Phase 2.
        let mut cost = vec![0.0; width - 1];
        for (j, &c) in self.objective.iter().enumerate() {
            cost[col_of[j]] = c;
            if self.free[j] {
                cost[col_of[j] + 1] = -c;
            }
        }
        if !t.run(&cost, n_real)? {
            return Ok(LpOutcome::Unbounded);
        }

        let mut col_val = vec![0.0; n_real];
        for (row, &b) in t.tab.iter().zip(&t.basis) {
            if b < n_real {
                col_val[b] = row[rhs_col];
            }
        }
        let x: Vec<f64> = (0..n)
            .map(|j| {
                let v = col_val[col_of[j]];
                if self.free[j] {
                    v - col_val[col_of[j] + 1]
                } else {
                    v
                }
            })
            .collect();
        let worst = self.worst_violation(&x);
        if worst > 1e-7 * scale {
            return Err(Error::Lp(format!("simplex lost accuracy: constraint residual {worst:e}")));
        }
        let value = x.iter().zip(&self.objective).map(|(a, b)| a * b).sum();
        Ok(LpOutcome::Optimal { x, value })
    }

    fn worst_violation(&self, x: &[f64]) -> f64 {
        let rows = self.rows.iter().map(|(c, rel, b)| {
            let v: f64 = c.iter().zip(x).map(|(a, y)| a * y).sum();
            match rel {
                Relation::Eq => (v - b).abs(),
                Relation::Le => (v - b).max(0.0),
                Relation::Ge => (b - v).max(0.0),
            }
        });
        let signs = x.iter().zip(&self.free).filter(|(_, &f)| !f).map(|(&v, _)| (-v).max(0.0));
        rows.chain(signs).fold(0.0, f64::max)
    }
}

/// Full tableau plus the original rows it was derived from, so that it can
/// be recomputed from the current basis when rounding error builds up.
struct Tableau {
    orig: Vec<Vec<f64>>,
    /// Original row index of each tableau row.
    kept: Vec<usize>,
    tab: Vec<Vec<f64>>,
    basis: Vec<usize>,
    pivots: usize,
}

impl Tableau {
    fn rhs_col(&self) -> usize {
        self.orig.first().map_or(0, |r| r.len() - 1)
    }

    /// Maximizes `cost^T x`, letting only columns below `enter_limit` enter.
    /// Returns false on unboundedness.
    fn run(&mut self, cost: &[f64], enter_limit: usize) -> Result<bool> {
        let rhs_col = self.rhs_col();
        let mut retried = false;
        for _ in 0..MAX_PIVOTS {
            let mut is_basic = vec![false; cost.len()];
            self.basis.iter().for_each(|&b| is_basic[b] = true);
            let basic_cost: Vec<(usize, f64)> =
                self.basis.iter().enumerate().filter(|(_, &b)| cost[b] != 0.0).map(|(i, &b)| (i, cost[b])).collect();
            // Bland: lowest-index column with positive reduced cost.
            let entering = (0..enter_limit).find(|&j| {
                !is_basic[j] && cost[j] - basic_cost.iter().map(|&(i, c)| c * self.tab[i][j]).sum::<f64>() > PIVOT_TOL
            });
            let Some(j) = entering else {
                if retried {
                    return Ok(true);
                }
                // Confirm optimality on a freshly computed tableau.
                self.reinvert();
                retried = true;
                continue;
            };

            // Harris ratio test: the largest pivot among rows whose ratio is
            // within the feasibility tolerance of the minimum.
            let cand = || self.tab.iter().enumerate().filter(|(_, row)| row[j] > PIVOT_TOL);
            let bound =
                cand().map(|(_, row)| (row[rhs_col].max(0.0) + FEAS_TOL) / row[j]).fold(f64::INFINITY, f64::min);
            let leave = cand()
                .filter(|(_, row)| row[rhs_col].max(0.0) / row[j] <= bound)
                .max_by(|(a, ra), (b, rb)| ra[j].total_cmp(&rb[j]).then(self.basis[*b].cmp(&self.basis[*a])))
                .map(|(i, _)| i);
            let Some(i) = leave else {
                if retried {
                    return Ok(false);
                }
                self.reinvert();
                retried = true;
                continue;
            };
            self.pivot(i, j);
            retried = false;
            if self.pivots.is_multiple_of(REINVERT_EVERY) {
                self.reinvert();
            }
        }
        Err(Error::Lp(format!("pivot limit {MAX_PIVOTS} reached")))
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let rhs_col = self.rhs_col();
        let p = self.tab[r][c];
        self.tab[r].iter_mut().for_each(|x| *x /= p);
        let pivot_row = self.tab[r].clone();
        for (i, row) in self.tab.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f != 0.0 {
                for (x, y) in row.iter_mut().zip(&pivot_row) {
                    *x -= f * y;
                }
                row[c] = 0.0;
            }
            // Harris steps may leave basic values a hair below zero.
            if row[rhs_col] < 0.0 && row[rhs_col] > -FEAS_TOL {
                row[rhs_col] = 0.0;
            }
        }
        self.basis[r] = c;
        self.pivots += 1;
    }

    /// Recomputes the tableau as `B^{-1} A` from the original rows. Keeps the
    /// current one if the basis matrix is numerically singular.
    fn reinvert(&mut self) {
        let m = self.tab.len();
        if m == 0 {
            return;
        }
        let width = self.orig[0].len();
        let b = DMatrix::from_fn(m, m, |i, k| self.orig[self.kept[i]][self.basis[k]]);
        let a = DMatrix::from_fn(m, width, |i, c| self.orig[self.kept[i]][c]);
        let Some(fresh) = b.lu().solve(&a) else { return };
        if fresh.iter().any(|x| !x.is_finite()) {
            return;
        }
        let rhs_col = width - 1;
        for (i, row) in self.tab.iter_mut().enumerate() {
            for (c, x) in row.iter_mut().enumerate() {
                *x = fresh[(i, c)];
            }
            row[self.basis[i]] = 1.0;
            if row[rhs_col] < 0.0 && row[rhs_col] > -FEAS_TOL {
                row[rhs_col] = 0.0;
            }
        }
    }
}

/// Outcome of [`lp_feasible`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LpCertificate {
    pub feasible: bool,
    pub solution: Option<Vec<f64>>,
    /// Optimal objective when one was supplied; `+inf` when unbounded.
    pub margin: Option<f64>,
}

/// Feasibility of `A x = b` with the flagged variables nonnegative (the rest
/// free), optionally maximizing `objective^T x`.
pub fn lp_feasible(
    a_eq: &[Vec<f64>],
    b_eq: &[f64],
    nonneg: &[bool],
    objective: Option<&[f64]>,
) -> Result<LpCertificate> {
    let n = nonneg.len();
    if a_eq.len() != b_eq.len() || a_eq.iter().any(|r| r.len() != n) {
        return Err(Error::Dimension("lp_feasible: inconsistent system".into()));
    }
    let mut lp = LinearProgram::new(n);
    for (j, &nn) in nonneg.iter().enumerate() {
        if !nn {
            lp.set_free(j);
        }
    }
    if let Some(c) = objective {
        if c.len() != n {
            return Err(Error::Dimension("lp_feasible: objective length".into()));
        }
        for (j, &cj) in c.iter().enumerate() {
            lp.set_objective(j, cj);
        }
    }
    for (row, &b) in a_eq.iter().zip(b_eq) {
        lp.add(row.clone(), Relation::Eq, b);
    }
    Ok(match lp.solve()? {
        LpOutcome::Optimal { x, value } => {
            LpCertificate { feasible: true, solution: Some(x), margin: objective.map(|_| value) }
        }
        LpOutcome::Infeasible => LpCertificate { feasible: false, solution: None, margin: None },
        LpOutcome::Unbounded => LpCertificate { feasible: true, solution: None, margin: Some(f64::INFINITY) },
    })
}
