//! The stacked active-gradient matrix of the SVC hyperparameter MPEC, built
//! from the refined index sets rather than from constraint activity.
//!
//! Row recipes by block (columns ordered as `(C, zeta, z, alpha, xi)`):
//!
//! ```text
//!   block 1   G: e_z(i) + (M)_i on alpha      H: e_zeta(i)
//!   block 2   G: -e_zeta(i)                   H: e_z(i)
//!   block 3   G: (K)_j on alpha + e_xi(j)     H: e_alpha(j)
//!   block 4   G: e_C - e_alpha(j)             H: e_xi(j)
//! ```
//!
//! Block 1 and 2 rows come from `psi3` (G) and `psi2` (H); block 3 from
//! `lambda3 u lambda_u` (G), `lambda2` (H) and `lambda1` (both); block 4 from
//! `lambda_u` (G), `lambda1 u lambda2 u lambda3_plus` (H) and `lambda3_c`
//! (both). Flagged indices, which the refined sets do not cover, fall back to
//! direct activity tests.

use serde::{Deserialize, Serialize};

use super::instance::BhoInstance;
use super::pattern::LambdaPsiPattern;
use super::point::BhoPoint;
use crate::model::{ActivePattern, PointEvaluation, RowFamily, Tolerances};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaRow {
    pub family: RowFamily,
    pub block: u8,
    /// Block-local sample index.
    pub local: usize,
    /// Index of the pair among all `n - 1`.
    pub pair: usize,
    pub grad: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaMatrix {
    pub columns: usize,
    pub rows: Vec<GammaRow>,
    /// `(n - 1) + |lambda1| + |lambda3_c|`, what the recipes above produce on
    /// an unflagged point.
    pub closed_form_row_count: usize,
    /// `2n - 2 + |lambda1| + |lambda3_c|`, the count quoted alongside the
    /// matrix form in the literature; kept for comparison only.
    pub quoted_row_count: usize,
}

impl GammaMatrix {
    pub fn stacked(&self) -> Vec<Vec<f64>> {
        self.rows.iter().map(|r| r.grad.clone()).collect()
    }
}

struct Rows<'a> {
    inst: &'a BhoInstance,
    out: Vec<GammaRow>,
}

impl Rows<'_> {
    fn unit(&self, col: usize) -> Vec<f64> {
        let mut r = vec![0.0; self.inst.n()];
        r[col] = 1.0;
        r
    }

    fn push(&mut self, family: RowFamily, block: u8, local: usize, grad: Vec<f64>) {
        let pair = self.inst.pair(block, local);
        self.out.push(GammaRow { family, block, local, pair, grad });
    }

    fn g1(&mut self, i: usize) {
        let inst = self.inst;
        let mut r = self.unit(inst.col_z(i));
        for j in 0..inst.n_train() {
            r[inst.col_alpha(j)] = inst.abt()[(i, j)];
        }
        self.push(RowFamily::CompG, 1, i, r);
    }

    fn h1(&mut self, i: usize) {
        let r = self.unit(self.inst.col_zeta(i));
        self.push(RowFamily::CompH, 1, i, r);
    }

    fn g2(&mut self, i: usize) {
        let mut r = self.unit(self.inst.col_zeta(i));
        r[self.inst.col_zeta(i)] = -1.0;
        self.push(RowFamily::CompG, 2, i, r);
    }

    fn h2(&mut self, i: usize) {
        let r = self.unit(self.inst.col_z(i));
        self.push(RowFamily::CompH, 2, i, r);
    }

    fn g3(&mut self, j: usize) {
        let inst = self.inst;
        let mut r = self.unit(inst.col_xi(j));
        for k in 0..inst.n_train() {
            r[inst.col_alpha(k)] = inst.bbt()[(j, k)];
        }
        self.push(RowFamily::CompG, 3, j, r);
    }

    fn h3(&mut self, j: usize) {
        let r = self.unit(self.inst.col_alpha(j));
        self.push(RowFamily::CompH, 3, j, r);
    }

    fn g4(&mut self, j: usize) {
        let mut r = self.unit(self.inst.col_c());
        r[self.inst.col_alpha(j)] = -1.0;
        self.push(RowFamily::CompG, 4, j, r);
    }

    fn h4(&mut self, j: usize) {
        let r = self.unit(self.inst.col_xi(j));
        self.push(RowFamily::CompH, 4, j, r);
    }
}

pub fn assemble_gamma(inst: &BhoInstance, point: &BhoPoint, pat: &LambdaPsiPattern, tol: &Tolerances) -> GammaMatrix {
    let eps = tol.activity_eps;
    let mut b = Rows { inst, out: Vec::new() };

    for &i in &pat.psi3 {
        b.g1(i);
        b.g2(i);
    }
    for &i in &pat.psi2 {
        b.h1(i);
        b.h2(i);
    }
    if !pat.flags.unclassified_validation.is_empty() {
        let margins = inst.abt() * nalgebra::DVector::from_column_slice(&point.alpha);
        for &i in &pat.flags.unclassified_validation {
            let (zeta, z) = (point.zeta[i], point.z[i]);
            if (margins[i] + z).abs() <= eps {
                b.g1(i);
            }
            if zeta.abs() <= eps {
                b.h1(i);
            }
            if (1.0 - zeta).abs() <= eps {
                b.g2(i);
            }
            if z.abs() <= eps {
                b.h2(i);
            }
        }
    }

    if pat.flags.degenerate_c {
        // alpha = 0 and alpha = C coincide; the refined sets cannot tell
        // which block-3/4 constraints are active.
        let k_alpha = inst.bbt() * nalgebra::DVector::from_column_slice(&point.alpha);
        for j in 0..inst.n_train() {
            let (a, xi) = (point.alpha[j], point.xi[j]);
            if (k_alpha[j] - 1.0 + xi).abs() <= eps {
                b.g3(j);
            }
            if a.abs() <= eps {
                b.h3(j);
            }
            if (point.c - a).abs() <= eps {
                b.g4(j);
            }
            if xi.abs() <= eps {
                b.h4(j);
            }
        }
    } else {
        for j in pat.lambda3().into_iter().chain(pat.lambda_u.iter().copied()) {
            b.g3(j);
        }
        for &j in &pat.lambda1 {
            b.g3(j);
            b.h3(j);
        }
        for &j in &pat.lambda2 {
            b.h3(j);
        }
        for &j in &pat.lambda_u {
            b.g4(j);
        }
        for &j in &pat.lambda3_c {
            b.g4(j);
            b.h4(j);
        }
        for &j in pat.lambda1.iter().chain(&pat.lambda2).chain(&pat.lambda3_plus) {
            b.h4(j);
        }
    }

    let mut rows = b.out;
    rows.sort_by_key(|r| (r.pair, r.family));
    let n = inst.n();
    let extra = pat.lambda1.len() + pat.lambda3_c.len();
    GammaMatrix { columns: n, rows, closed_form_row_count: n - 1 + extra, quoted_row_count: 2 * n - 2 + extra }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaComparison {
    /// Every `(family, pair)` row present in both with equal entries.
    pub entrywise_match: bool,
    /// Row multisets equal regardless of labels.
    pub multiset_match: bool,
    pub gamma_rows: usize,
    pub bundle_rows: usize,
    /// `|I_G| + |I_H| + 2 |I_GH|` from the generic active sets.
    pub accounting_row_count: usize,
    pub max_entry_diff: f64,
    pub missing_from_gamma: Vec<(RowFamily, usize)>,
    pub extra_in_gamma: Vec<(RowFamily, usize)>,
}

impl GammaComparison {
    pub fn matches(&self) -> bool {
        self.entrywise_match && self.multiset_match && self.gamma_rows == self.accounting_row_count
    }
}

/// Compares Γ with the tightened-program gradient bundle the generic model
/// builds from the same point.
pub fn compare_with_bundle(gamma: &GammaMatrix, eval: &PointEvaluation, active: &ActivePattern) -> GammaComparison {
    let mut generic: Vec<(RowFamily, usize)> = Vec::new();
    for &k in active.g_only.iter().chain(&active.biactive) {
        generic.push((RowFamily::CompG, k));
    }
    for &k in active.h_only.iter().chain(&active.biactive) {
        generic.push((RowFamily::CompH, k));
    }
    generic.sort_unstable();
    let mut ours: Vec<(RowFamily, usize)> = gamma.rows.iter().map(|r| (r.family, r.pair)).collect();
    ours.sort_unstable();

    let missing_from_gamma: Vec<_> = generic.iter().filter(|k| !ours.contains(k)).copied().collect();
    let extra_in_gamma: Vec<_> = ours.iter().filter(|k| !generic.contains(k)).copied().collect();
    let mut max_entry_diff = 0.0f64;
    for r in &gamma.rows {
        if generic.contains(&(r.family, r.pair)) {
            let g = eval.grad(r.family, r.pair);
            for (a, b) in r.grad.iter().zip(g) {
                max_entry_diff = max_entry_diff.max((a - b).abs());
            }
        }
    }

    let key = |row: &[f64]| -> Vec<u64> { row.iter().map(|x| (x + 0.0).to_bits()).collect() };
    let mut a: Vec<Vec<u64>> = gamma.rows.iter().map(|r| key(&r.grad)).collect();
    let mut b: Vec<Vec<u64>> = generic.iter().map(|&(f, k)| key(eval.grad(f, k))).collect();
    a.sort_unstable();
    b.sort_unstable();

    GammaComparison {
        entrywise_match: missing_from_gamma.is_empty() && extra_in_gamma.is_empty() && max_entry_diff == 0.0,
        multiset_match: a == b,
        gamma_rows: gamma.rows.len(),
        bundle_rows: generic.len(),
        accounting_row_count: active.g_only.len() + active.h_only.len() + 2 * active.biactive.len(),
        max_entry_diff,
        missing_from_gamma,
        extra_in_gamma,
    }
}
