//! Existence of a vanishing combination of rows with prescribed coefficient signs.
//!
//! This is the common dual core of positive linear independence, MFCQ and the
//! abnormal-multiplier condition: is there a nonzero `y` with
//! `sum_i y_i r_i = 0`, `y >= 0` on one block, `y > 0` on another, `y = 0` on a
//! third and `y` free on the rest?

use serde::{Deserialize, Serialize};

use super::lp::{LinearProgram, LpOutcome, Relation};
use super::rank::{combination_residual, numerical_rank};
use crate::error::{Error, Result};
use crate::model::Tolerances;

/// Rows grouped by the sign class of their coefficient.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SignedCombinationQuery {
    pub cols: usize,
    pub nonneg_rows: Vec<Vec<f64>>,
    pub strict_pos_rows: Vec<Vec<f64>>,
    /// Kept for provenance; their coefficient is fixed at zero.
    pub zero_rows: Vec<Vec<f64>>,
    pub free_rows: Vec<Vec<f64>>,
}

impl SignedCombinationQuery {
    pub fn new(cols: usize) -> Self {
        Self { cols, ..Default::default() }
    }

    pub fn len(&self) -> usize {
        self.nonneg_rows.len() + self.strict_pos_rows.len() + self.zero_rows.len() + self.free_rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All rows in coefficient order: nonneg, strict, zero, free.
    pub fn all_rows(&self) -> Vec<Vec<f64>> {
        self.nonneg_rows
            .iter()
            .chain(&self.strict_pos_rows)
            .chain(&self.zero_rows)
            .chain(&self.free_rows)
            .cloned()
            .collect()
    }

    fn offsets(&self) -> [usize; 4] {
        let a = self.nonneg_rows.len();
        let b = a + self.strict_pos_rows.len();
        let c = b + self.zero_rows.len();
        [0, a, b, c]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CombinationWitness {
    pub exists: bool,
    /// Coefficients over [`SignedCombinationQuery::all_rows`], 1-norm one.
    pub coefficients: Option<Vec<f64>>,
    /// Strict margin reached by the normalized LP (nonneg mass when there is
    /// no strict block; 1 for a pure free-row dependence).
    pub margin: f64,
    /// `||sum coeff_i row_i||_inf` of the returned witness.
    pub residual: f64,
}

impl CombinationWitness {
    fn none(margin: f64) -> Self {
        Self { exists: false, coefficients: None, margin, residual: 0.0 }
    }
}

/// Decides whether a nonzero sign-respecting vanishing combination exists.
///
/// Rows are normalized to unit length first, which makes the verdict
/// invariant under positive row scaling. Pure free-row dependence is settled
/// by numerical rank; everything else by a max-margin LP under a 1-norm
/// normalization.
pub fn signed_combination_exists(q: &SignedCombinationQuery, tol: &Tolerances) -> Result<CombinationWitness> {
    for r in q.all_rows() {
        if r.len() != q.cols {
            return Err(Error::Dimension(format!("row of length {} in a query with {} columns", r.len(), q.cols)));
        }
    }
    let [off_n, off_s, _, off_f] = q.offsets();
    let total = q.len();
    let unit = |r: &Vec<f64>| -> (Vec<f64>, f64) {
        let s = r.iter().map(|x| x * x).sum::<f64>().sqrt();
        if s > 0.0 {
            (r.iter().map(|x| x / s).collect(), s)
        } else {
            (r.clone(), 0.0)
        }
    };
    let nonneg: Vec<_> = q.nonneg_rows.iter().map(unit).collect();
    let strict: Vec<_> = q.strict_pos_rows.iter().map(unit).collect();
    let free: Vec<_> = q.free_rows.iter().map(unit).collect();

    // Without a strict block, a zero row is a witness by itself.
    let zero_hit = nonneg
        .iter()
        .position(|r| r.1 == 0.0)
        .map(|i| off_n + i)
        .or_else(|| free.iter().position(|r| r.1 == 0.0).map(|i| off_f + i))
        .filter(|_| strict.is_empty());
    if let Some(k) = zero_hit {
        let mut y = vec![0.0; total];
        y[k] = 1.0;
        return finish(q, y, 1.0, tol);
    }

    let free_units: Vec<Vec<f64>> = free.iter().map(|r| r.0.clone()).collect();
    if strict.is_empty() {
        let rank = numerical_rank(&free_units, q.cols, tol.rank_rel_tol);
        if rank.rank < free_units.len() {
            let w = rank.null_witness.expect("deficient rank carries a witness");
            let mut y = vec![0.0; total];
            for (i, wi) in w.iter().enumerate() {
                y[off_f + i] = wi / free[i].1;
            }
            return finish(q, y, 1.0, tol);
        }
        if nonneg.is_empty() {
            return Ok(CombinationWitness::none(0.0));
        }
    }

    // Variables: nonneg | strict | free+ | free- | t (strict block only).
    let k_n = nonneg.len();
    let k_s = strict.len();
    let k_f = free.len();
    let has_t = k_s > 0;
    let n_vars = k_n + k_s + 2 * k_f + usize::from(has_t);
    let t_var = n_vars - 1;
    let mut lp = LinearProgram::new(n_vars);
    for c in 0..q.cols {
        let mut row = vec![0.0; n_vars];
        for (i, r) in nonneg.iter().enumerate() {
            row[i] = r.0[c];
        }
        for (i, r) in strict.iter().enumerate() {
            row[k_n + i] = r.0[c];
        }
        for (i, r) in free.iter().enumerate() {
            row[k_n + k_s + i] = r.0[c];
            row[k_n + k_s + k_f + i] = -r.0[c];
        }
        lp.add(row, Relation::Eq, 0.0);
    }
    let mut mass = vec![1.0; n_vars];
    if has_t {
        mass[t_var] = 0.0;
        for i in 0..k_s {
            lp.add_sparse(&[(k_n + i, 1.0), (t_var, -1.0)], Relation::Ge, 0.0);
        }
        lp.set_objective(t_var, 1.0);
    } else {
        for i in 0..k_n {
            lp.set_objective(i, 1.0);
        }
    }
    lp.add(mass, Relation::Eq, 1.0);

    let (x, margin) = match lp.solve()? {
        LpOutcome::Optimal { x, value } => (x, value),
        LpOutcome::Infeasible => return Ok(CombinationWitness::none(0.0)),
        LpOutcome::Unbounded => return Err(Error::Lp("normalized combination LP reported unbounded".into())),
    };
    if margin < tol.strict_margin_eps {
        return Ok(CombinationWitness::none(margin.max(0.0)));
    }
    let mut y = vec![0.0; total];
    // Zero rows keep their coefficient in normalized units.
    let scale = |s: f64| if s > 0.0 { s } else { 1.0 };
    for i in 0..k_n {
        y[off_n + i] = x[i].max(0.0) / scale(nonneg[i].1);
    }
    for i in 0..k_s {
        y[off_s + i] = x[k_n + i] / scale(strict[i].1);
    }
    for i in 0..k_f {
        y[off_f + i] = (x[k_n + k_s + i] - x[k_n + k_s + k_f + i]) / scale(free[i].1);
    }
    finish(q, y, margin, tol)
}

fn finish(q: &SignedCombinationQuery, mut y: Vec<f64>, margin: f64, tol: &Tolerances) -> Result<CombinationWitness> {
    let norm: f64 = y.iter().map(|v| v.abs()).sum();
    if norm == 0.0 {
        return Ok(CombinationWitness::none(0.0));
    }
    y.iter_mut().for_each(|v| *v /= norm);
    let residual = verify_witness(q, &y, tol)?;
    Ok(CombinationWitness { exists: true, coefficients: Some(y), margin, residual })
}

/// Checks a coefficient vector against the query from scratch: sign classes,
/// nonzero-ness and the combination residual. Returns the residual.
pub fn verify_witness(q: &SignedCombinationQuery, y: &[f64], tol: &Tolerances) -> Result<f64> {
    let rows = q.all_rows();
    if y.len() != rows.len() {
        return Err(Error::Dimension("witness length".into()));
    }
    let [off_n, off_s, off_z, off_f] = q.offsets();
    let signs_ok = y[off_n..off_s].iter().all(|&v| v >= 0.0)
        && y[off_s..off_z].iter().all(|&v| v > 0.0)
        && y[off_z..off_f].iter().all(|&v| v == 0.0)
        && y.iter().any(|&v| v != 0.0);
    let residual = combination_residual(&rows, y, q.cols);
    if !signs_ok || residual > tol.witness_slack {
        return Err(Error::WitnessVerification { residual });
    }
    Ok(residual)
}
