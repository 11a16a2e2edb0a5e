//! Pointwise representation of an MPEC
//!
//! ```text
//!     min f(v)  s.t.  g(v) <= 0,  h(v) = 0,  G(v) >= 0,  H(v) >= 0,  G(v) o H(v) = 0
//! ```
//!
//! Every constraint-qualification check only needs constraint values and
//! gradients at one candidate point, so the central type is a
//! [`PointEvaluation`] record. Nonlinear problems are supplied as precomputed
//! records; affine problems can additionally be evaluated anywhere through
//! [`AffineMpec`].
//!
//! All indices are zero-based.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MpecDimensions {
    /// Decision variables.
    pub n: usize,
    /// Inequalities `g(v) <= 0`.
    pub m: usize,
    /// Equalities `h(v) = 0`.
    pub p: usize,
    /// Complementarity pairs `(G_i, H_i)`.
    pub l: usize,
}

/// Constraint values and gradient rows at one point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointEvaluation {
    #[serde(flatten)]
    pub dims: MpecDimensions,
    pub point: Vec<f64>,
    pub g_vals: Vec<f64>,
    pub h_vals: Vec<f64>,
    #[serde(rename = "G_vals")]
    pub comp_g_vals: Vec<f64>,
    #[serde(rename = "H_vals")]
    pub comp_h_vals: Vec<f64>,
    pub g_grads: Vec<Vec<f64>>,
    pub h_grads: Vec<Vec<f64>>,
    #[serde(rename = "G_grads")]
    pub comp_g_grads: Vec<Vec<f64>>,
    #[serde(rename = "H_grads")]
    pub comp_h_grads: Vec<Vec<f64>>,
    /// Set when every constraint function is affine.
    #[serde(default)]
    pub affine: bool,
}

impl PointEvaluation {
    /// Checks that every vector and gradient block matches `dims` and that all
    /// entries are finite.
    pub fn validate(&self) -> Result<()> {
        let d = self.dims;
        if d.n == 0 {
            return Err(Error::Dimension("n must be at least 1".into()));
        }
        check_len("point", self.point.len(), d.n)?;
        check_len("g_vals", self.g_vals.len(), d.m)?;
        check_len("h_vals", self.h_vals.len(), d.p)?;
        check_len("G_vals", self.comp_g_vals.len(), d.l)?;
        check_len("H_vals", self.comp_h_vals.len(), d.l)?;
        check_block("g_grads", &self.g_grads, d.m, d.n)?;
        check_block("h_grads", &self.h_grads, d.p, d.n)?;
        check_block("G_grads", &self.comp_g_grads, d.l, d.n)?;
        check_block("H_grads", &self.comp_h_grads, d.l, d.n)?;
        for (name, v) in [
            ("point", &self.point),
            ("g_vals", &self.g_vals),
            ("h_vals", &self.h_vals),
            ("G_vals", &self.comp_g_vals),
            ("H_vals", &self.comp_h_vals),
        ] {
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite(name.into()));
            }
        }
        for (name, b) in [
            ("g_grads", &self.g_grads),
            ("h_grads", &self.h_grads),
            ("G_grads", &self.comp_g_grads),
            ("H_grads", &self.comp_h_grads),
        ] {
            if b.iter().flatten().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite(name.into()));
            }
        }
        Ok(())
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let eval: Self = serde_json::from_str(s)?;
        eval.validate()?;
        Ok(eval)
    }

    /// Gradient row of one constraint.
    pub fn grad(&self, family: RowFamily, index: usize) -> &[f64] {
        match family {
            RowFamily::Ineq => &self.g_grads[index],
            RowFamily::Eq => &self.h_grads[index],
            RowFamily::CompG => &self.comp_g_grads[index],
            RowFamily::CompH => &self.comp_h_grads[index],
        }
    }
}

fn check_len(name: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::Dimension(format!("{name}: length {got}, expected {want}")));
    }
    Ok(())
}

fn check_block(name: &str, rows: &[Vec<f64>], count: usize, n: usize) -> Result<()> {
    check_len(name, rows.len(), count)?;
    for (i, r) in rows.iter().enumerate() {
        if r.len() != n {
            return Err(Error::Dimension(format!("{name}[{i}]: length {}, expected {n}", r.len())));
        }
    }
    Ok(())
}

/// Numerical thresholds. Activity is defined exactly at zero in theory; in
/// floating point every classification goes through one of these.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Absolute threshold below which a constraint value counts as zero.
    pub activity_eps: f64,
    /// Relative singular-value cutoff for numerical rank.
    pub rank_rel_tol: f64,
    /// Minimum-eigenvalue threshold for positive definiteness.
    pub pd_eps: f64,
    /// Margin an LP must reach for a strict inequality to count as satisfied.
    pub strict_margin_eps: f64,
    /// Feasibility residual bound.
    pub feas_eps: f64,
    /// Residual bound used when post-verifying witnesses.
    pub witness_slack: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            activity_eps: 1e-8,
            rank_rel_tol: 1e-10,
            pd_eps: 1e-10,
            strict_margin_eps: 1e-7,
            feas_eps: 1e-8,
            witness_slack: 1e-6,
        }
    }
}

impl Tolerances {
    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("activity_eps", self.activity_eps),
            ("rank_rel_tol", self.rank_rel_tol),
            ("pd_eps", self.pd_eps),
            ("strict_margin_eps", self.strict_margin_eps),
            ("feas_eps", self.feas_eps),
            ("witness_slack", self.witness_slack),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::Tolerance { name, value });
            }
        }
        Ok(())
    }
}

/// Active index sets at a feasible point.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActivePattern {
    /// Active inequalities.
    #[serde(rename = "I_g")]
    pub ineq: Vec<usize>,
    /// Pairs with `G_i = 0 < H_i`.
    #[serde(rename = "I_G")]
    pub g_only: Vec<usize>,
    /// Pairs with `G_i > 0 = H_i`.
    #[serde(rename = "I_H")]
    pub h_only: Vec<usize>,
    /// Biactive pairs, `G_i = H_i = 0`.
    #[serde(rename = "I_GH")]
    pub biactive: Vec<usize>,
}

/// Constraint family tags used for provenance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ConstraintFamily {
    #[serde(rename = "g")]
    Ineq,
    #[serde(rename = "h")]
    Eq,
    #[serde(rename = "G")]
    CompG,
    #[serde(rename = "H")]
    CompH,
    /// The product `G_i * H_i`.
    #[serde(rename = "GH")]
    Product,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub family: ConstraintFamily,
    pub index: usize,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub feasible: bool,
    pub max_violation: f64,
    pub violating_constraints: Vec<Violation>,
}

pub fn check_feasibility(eval: &PointEvaluation, tol: &Tolerances) -> Result<FeasibilityReport> {
    eval.validate()?;
    let mut residuals: Vec<(ConstraintFamily, usize, f64)> = Vec::new();
    residuals.extend(eval.g_vals.iter().enumerate().map(|(i, &g)| (ConstraintFamily::Ineq, i, g.max(0.0))));
    residuals.extend(eval.h_vals.iter().enumerate().map(|(i, &h)| (ConstraintFamily::Eq, i, h.abs())));
    for (i, (&g, &h)) in eval.comp_g_vals.iter().zip(&eval.comp_h_vals).enumerate() {
        residuals.push((ConstraintFamily::CompG, i, (-g).max(0.0)));
        residuals.push((ConstraintFamily::CompH, i, (-h).max(0.0)));
        residuals.push((ConstraintFamily::Product, i, (g * h).abs()));
    }
    let max_violation = residuals.iter().map(|r| r.2).fold(0.0, f64::max);
    let violating_constraints = residuals
        .into_iter()
        .filter(|r| r.2 > tol.feas_eps)
        .map(|(family, index, residual)| Violation { family, index, residual })
        .collect();
    Ok(FeasibilityReport { feasible: max_violation <= tol.feas_eps, max_violation, violating_constraints })
}

/// Splits constraints into the active index sets using `activity_eps`.
///
/// A pair with both `G_i` and `H_i` above the threshold is reported as an
/// error rather than forced into a class.
pub fn classify_active(eval: &PointEvaluation, tol: &Tolerances) -> Result<ActivePattern> {
    eval.validate()?;
    let eps = tol.activity_eps;
    let mut pattern = ActivePattern {
        ineq: eval.g_vals.iter().enumerate().filter(|(_, g)| g.abs() <= eps).map(|(i, _)| i).collect(),
        ..Default::default()
    };
    for (i, (&g, &h)) in eval.comp_g_vals.iter().zip(&eval.comp_h_vals).enumerate() {
        match (g.abs() <= eps, h.abs() <= eps) {
            (true, true) => pattern.biactive.push(i),
            (true, false) if h > eps => pattern.g_only.push(i),
            (false, true) if g > eps => pattern.h_only.push(i),
            _ => return Err(Error::Complementarity { index: i, g, h }),
        }
    }
    Ok(pattern)
}

/// Gradient-row family, i.e. [`ConstraintFamily`] without the product.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RowFamily {
    #[serde(rename = "g")]
    Ineq,
    #[serde(rename = "h")]
    Eq,
    #[serde(rename = "G")]
    CompG,
    #[serde(rename = "H")]
    CompH,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BundleRow {
    pub family: RowFamily,
    pub index: usize,
    pub grad: Vec<f64>,
}

/// Active gradients split into a sign-constrained part and a free part.
///
/// Rows are stored as raw constraint gradients. For the relaxed bundle the
/// signed complementarity rows stand for the constraints `G_i >= 0`,
/// `H_i >= 0`; consumers that need `<= 0` orientation negate them.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GradientBundle {
    pub signed: Vec<BundleRow>,
    pub free: Vec<BundleRow>,
}

impl GradientBundle {
    pub fn len(&self) -> usize {
        self.signed.len() + self.free.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Signed rows followed by free rows, provenance dropped.
    pub fn stacked(&self) -> Vec<Vec<f64>> {
        self.signed.iter().chain(&self.free).map(|r| r.grad.clone()).collect()
    }

    /// Row-set equality per sign class, ignoring order.
    pub fn same_rows(&self, other: &GradientBundle) -> bool {
        fn keyed(rows: &[BundleRow]) -> Vec<(RowFamily, usize, Vec<u64>)> {
            let mut v: Vec<_> =
                rows.iter().map(|r| (r.family, r.index, r.grad.iter().map(|x| x.to_bits()).collect())).collect();
            v.sort();
            v
        }
        keyed(&self.signed) == keyed(&other.signed) && keyed(&self.free) == keyed(&other.free)
    }
}

fn rows_of(eval: &PointEvaluation, family: RowFamily, idx: &[usize]) -> Vec<BundleRow> {
    idx.iter().map(|&i| BundleRow { family, index: i, grad: eval.grad(family, i).to_vec() }).collect()
}

fn sorted_union(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut v: Vec<usize> = a.iter().chain(b).copied().collect();
    v.sort_unstable();
    v.dedup();
    v
}

/// Active gradients of the tightened program: biactive pairs become two
/// equalities, so only the active inequalities are sign-constrained.
pub fn gradient_bundle_tnlp(eval: &PointEvaluation, pattern: &ActivePattern) -> GradientBundle {
    let all_eq: Vec<usize> = (0..eval.dims.p).collect();
    let mut free = rows_of(eval, RowFamily::Eq, &all_eq);
    free.extend(rows_of(eval, RowFamily::CompG, &sorted_union(&pattern.g_only, &pattern.biactive)));
    free.extend(rows_of(eval, RowFamily::CompH, &sorted_union(&pattern.h_only, &pattern.biactive)));
    GradientBundle { signed: rows_of(eval, RowFamily::Ineq, &pattern.ineq), free }
}

/// Active gradients of the relaxed program: biactive pairs become the two
/// inequalities `G_i >= 0`, `H_i >= 0`.
pub fn gradient_bundle_rnlp(eval: &PointEvaluation, pattern: &ActivePattern) -> GradientBundle {
    let mut signed = rows_of(eval, RowFamily::Ineq, &pattern.ineq);
    signed.extend(rows_of(eval, RowFamily::CompG, &pattern.biactive));
    signed.extend(rows_of(eval, RowFamily::CompH, &pattern.biactive));
    let all_eq: Vec<usize> = (0..eval.dims.p).collect();
    let mut free = rows_of(eval, RowFamily::Eq, &all_eq);
    free.extend(rows_of(eval, RowFamily::CompG, &pattern.g_only));
    free.extend(rows_of(eval, RowFamily::CompH, &pattern.h_only));
    GradientBundle { signed, free }
}

/// `x -> M x + offset`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineMap {
    pub matrix: Vec<Vec<f64>>,
    pub offset: Vec<f64>,
}

impl AffineMap {
    pub fn empty() -> Self {
        Self { matrix: Vec::new(), offset: Vec::new() }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.matrix
            .iter()
            .zip(&self.offset)
            .map(|(row, b)| row.iter().zip(x).map(|(a, x)| a * x).sum::<f64>() + b)
            .collect()
    }
}

/// An MPEC whose constraint functions are all affine.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineMpec {
    pub n: usize,
    pub g: AffineMap,
    pub h: AffineMap,
    pub comp_g: AffineMap,
    pub comp_h: AffineMap,
}

impl AffineMpec {
    pub fn dims(&self) -> MpecDimensions {
        MpecDimensions { n: self.n, m: self.g.offset.len(), p: self.h.offset.len(), l: self.comp_g.offset.len() }
    }

    pub fn evaluate(&self, point: &[f64]) -> Result<PointEvaluation> {
        if self.comp_h.offset.len() != self.comp_g.offset.len() {
            return Err(Error::Dimension("G and H must have the same number of rows".into()));
        }
        let eval = PointEvaluation {
            dims: self.dims(),
            point: point.to_vec(),
            g_vals: self.g.apply(point),
            h_vals: self.h.apply(point),
            comp_g_vals: self.comp_g.apply(point),
            comp_h_vals: self.comp_h.apply(point),
            g_grads: self.g.matrix.clone(),
            h_grads: self.h.matrix.clone(),
            comp_g_grads: self.comp_g.matrix.clone(),
            comp_h_grads: self.comp_h.matrix.clone(),
            affine: true,
        };
        eval.validate()?;
        Ok(eval)
    }
}
