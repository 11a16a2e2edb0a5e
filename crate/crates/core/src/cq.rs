//! MPEC constraint qualifications at a feasible point.
//!
//! Every check reduces to one of two questions about active gradient rows:
//! are they linearly independent (numerical rank), or does a nonzero
//! sign-respecting combination of them vanish (a normalized LP). Inequality
//! rows enter combinations in `<= 0` orientation, so the complementarity rows
//! `G_i >= 0`, `H_i >= 0` are negated wherever their sign matters.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::kernels::{
    numerical_rank, signed_combination_exists, CombinationWitness, LinearProgram, LpOutcome, RankResult, Relation,
    SignedCombinationQuery,
};
use crate::model::{gradient_bundle_tnlp, ActivePattern, PointEvaluation, RowFamily, Tolerances};

/// Default cap on `|I_GH|` for the branch-enumerating checks.
pub const DEFAULT_BIACTIVE_CAP: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CqName {
    #[serde(rename = "MPEC_LICQ")]
    MpecLicq,
    #[serde(rename = "MPEC_MFCQ_T")]
    MpecMfcqT,
    #[serde(rename = "MPEC_MFCQ_R")]
    MpecMfcqR,
    #[serde(rename = "NNAMCQ")]
    Nnamcq,
    #[serde(rename = "MPEC_GMFCQ")]
    MpecGmfcq,
    #[serde(rename = "MPEC_ACQ_AFFINE")]
    MpecAcqAffine,
}

impl fmt::Display for CqName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CqName::MpecLicq => "MPEC-LICQ",
            CqName::MpecMfcqT => "MPEC-MFCQ-T",
            CqName::MpecMfcqR => "MPEC-MFCQ-R",
            CqName::Nnamcq => "NNAMCQ",
            CqName::MpecGmfcq => "MPEC-GMFCQ",
            CqName::MpecAcqAffine => "MPEC-ACQ (affine)",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Holds,
    Fails,
    Undecided,
}

/// One gradient row inside a certificate; `sign` is -1 when the row entered
/// the combination negated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RowTag {
    pub family: RowFamily,
    pub index: usize,
    pub sign: f64,
}

/// Per-biactive-index branch of the abnormal-multiplier enumeration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BiactiveBranch {
    /// Both multipliers strictly positive.
    BothPositive,
    /// `lambda^G_i = 0`, `lambda^H_i` free.
    GZero,
    /// `lambda^H_i = 0`, `lambda^G_i` free.
    HZero,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Certificate {
    Rank {
        #[serde(flatten)]
        rank: RankResult,
        rows: Vec<RowTag>,
    },
    Combination {
        witness: CombinationWitness,
        /// Provenance of each coefficient, in witness order.
        rows: Vec<RowTag>,
        #[serde(skip_serializing_if = "Option::is_none")]
        branch: Option<Vec<(usize, BiactiveBranch)>>,
    },
    /// A GMFCQ partition for which the required direction does not exist.
    Partition { p: Vec<usize>, q: Vec<usize>, r: Vec<usize>, condition: String, margin: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CqVerdict {
    pub cq: CqName,
    pub verdict: Verdict,
    pub certificate: Option<Certificate>,
    pub notes: Vec<String>,
}

impl CqVerdict {
    fn new(cq: CqName, verdict: Verdict) -> Self {
        Self { cq, verdict, certificate: None, notes: Vec::new() }
    }

    pub fn holds(&self) -> bool {
        self.verdict == Verdict::Holds
    }

    pub fn is_decided(&self) -> bool {
        self.verdict != Verdict::Undecided
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImplicationViolation {
    pub premise: CqName,
    pub conclusion: CqName,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CqReport {
    pub pattern: ActivePattern,
    pub verdicts: Vec<CqVerdict>,
    pub implication_violations: Vec<ImplicationViolation>,
}

impl CqReport {
    pub fn get(&self, cq: CqName) -> Option<&CqVerdict> {
        self.verdicts.iter().find(|v| v.cq == cq)
    }

    pub fn verdict(&self, cq: CqName) -> Option<Verdict> {
        self.get(cq).map(|v| v.verdict)
    }
}

/// Accumulates tagged rows per sign class and emits a query plus provenance.
struct QueryBuilder<'a> {
    eval: &'a PointEvaluation,
    nonneg: Vec<RowTag>,
    strict: Vec<RowTag>,
    zero: Vec<RowTag>,
    free: Vec<RowTag>,
}

impl<'a> QueryBuilder<'a> {
    fn new(eval: &'a PointEvaluation) -> Self {
        Self { eval, nonneg: Vec::new(), strict: Vec::new(), zero: Vec::new(), free: Vec::new() }
    }

    fn tag(family: RowFamily, index: usize, sign: f64) -> RowTag {
        RowTag { family, index, sign }
    }

    fn nonneg(&mut self, family: RowFamily, idx: &[usize], sign: f64) -> &mut Self {
        self.nonneg.extend(idx.iter().map(|&i| Self::tag(family, i, sign)));
        self
    }

    fn strict(&mut self, family: RowFamily, idx: &[usize], sign: f64) -> &mut Self {
        self.strict.extend(idx.iter().map(|&i| Self::tag(family, i, sign)));
        self
    }

    fn zero(&mut self, family: RowFamily, idx: &[usize]) -> &mut Self {
        self.zero.extend(idx.iter().map(|&i| Self::tag(family, i, 1.0)));
        self
    }

    fn free(&mut self, family: RowFamily, idx: &[usize]) -> &mut Self {
        self.free.extend(idx.iter().map(|&i| Self::tag(family, i, 1.0)));
        self
    }

    fn rows(&self, tags: &[RowTag]) -> Vec<Vec<f64>> {
        tags.iter().map(|t| self.eval.grad(t.family, t.index).iter().map(|x| t.sign * x).collect()).collect()
    }

    fn build(&self) -> (SignedCombinationQuery, Vec<RowTag>) {
        let q = SignedCombinationQuery {
            cols: self.eval.dims.n,
            nonneg_rows: self.rows(&self.nonneg),
            strict_pos_rows: self.rows(&self.strict),
            zero_rows: self.rows(&self.zero),
            free_rows: self.rows(&self.free),
        };
        let tags = self.nonneg.iter().chain(&self.strict).chain(&self.zero).chain(&self.free).cloned().collect();
        (q, tags)
    }
}

fn all_eq(eval: &PointEvaluation) -> Vec<usize> {
    (0..eval.dims.p).collect()
}

fn union(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut v: Vec<usize> = a.iter().chain(b).copied().collect();
    v.sort_unstable();
    v.dedup();
    v
}

/// Linear independence of the tightened active-gradient set.
pub fn check_mpec_licq(eval: &PointEvaluation, pattern: &ActivePattern, tol: &Tolerances) -> CqVerdict {
    let bundle = gradient_bundle_tnlp(eval, pattern);
    let rows = bundle.stacked();
    let rank = numerical_rank(&rows, eval.dims.n, tol.rank_rel_tol);
    let mut v = CqVerdict::new(CqName::MpecLicq, Verdict::Holds);
    v.notes.push(format!("rank {} of {} active gradients", rank.rank, rows.len()));
    if rank.rank < rows.len() {
        v.verdict = Verdict::Fails;
        let tags = bundle
            .signed
            .iter()
            .chain(&bundle.free)
            .map(|r| RowTag { family: r.family, index: r.index, sign: 1.0 })
            .collect();
        v.certificate = Some(Certificate::Rank { rank, rows: tags });
    }
    v
}

fn combination_verdict(
    cq: CqName,
    builder: &QueryBuilder<'_>,
    tol: &Tolerances,
    branch: Option<Vec<(usize, BiactiveBranch)>>,
) -> Result<CqVerdict> {
    let (q, tags) = builder.build();
    let witness = signed_combination_exists(&q, tol)?;
    let mut v = CqVerdict::new(cq, Verdict::Holds);
    if witness.exists {
        v.verdict = Verdict::Fails;
        v.certificate = Some(Certificate::Combination { witness, rows: tags, branch });
    }
    Ok(v)
}

/// MFCQ for the tightened program: the active inequality gradients together
/// with all equality-type rows are positively linearly independent.
pub fn check_mpec_mfcq_t(eval: &PointEvaluation, pattern: &ActivePattern, tol: &Tolerances) -> Result<CqVerdict> {
    let mut b = QueryBuilder::new(eval);
    b.nonneg(RowFamily::Ineq, &pattern.ineq, 1.0)
        .free(RowFamily::Eq, &all_eq(eval))
        .free(RowFamily::CompG, &union(&pattern.g_only, &pattern.biactive))
        .free(RowFamily::CompH, &union(&pattern.h_only, &pattern.biactive));
    combination_verdict(CqName::MpecMfcqT, &b, tol, None)
}

/// MFCQ for the relaxed program, where biactive pairs are the inequalities
/// `G_i >= 0`, `H_i >= 0`.
pub fn check_mpec_mfcq_r(eval: &PointEvaluation, pattern: &ActivePattern, tol: &Tolerances) -> Result<CqVerdict> {
    let mut b = QueryBuilder::new(eval);
    b.nonneg(RowFamily::Ineq, &pattern.ineq, 1.0)
        .nonneg(RowFamily::CompG, &pattern.biactive, -1.0)
        .nonneg(RowFamily::CompH, &pattern.biactive, -1.0)
        .free(RowFamily::Eq, &all_eq(eval))
        .free(RowFamily::CompG, &pattern.g_only)
        .free(RowFamily::CompH, &pattern.h_only);
    combination_verdict(CqName::MpecMfcqR, &b, tol, None)
}

/// Iterates over all `3^k` assignments of three labels to `k` items.
fn ternary_assignments(k: usize) -> impl Iterator<Item = Vec<u8>> {
    let total = 3usize.pow(k as u32);
    (0..total).map(move |mut code| {
        let mut digits = vec![0u8; k];
        for d in digits.iter_mut() {
            *d = (code % 3) as u8;
            code /= 3;
        }
        digits
    })
}

fn cap_exceeded(cq: CqName, k: usize, cap: usize) -> CqVerdict {
    let mut v = CqVerdict::new(cq, Verdict::Undecided);
    v.notes.push(format!("|I_GH| = {k} exceeds enumeration cap {cap}"));
    v
}

/// No nonzero abnormal multiplier, decided by enumerating the three
/// admissible sign branches of every biactive pair.
pub fn check_nnamcq(
    eval: &PointEvaluation,
    pattern: &ActivePattern,
    tol: &Tolerances,
    cap: usize,
) -> Result<CqVerdict> {
    let k = pattern.biactive.len();
    if k > cap {
        return Ok(cap_exceeded(CqName::Nnamcq, k, cap));
    }
    let branches = [BiactiveBranch::BothPositive, BiactiveBranch::GZero, BiactiveBranch::HZero];
    for digits in ternary_assignments(k) {
        let choice: Vec<(usize, BiactiveBranch)> =
            pattern.biactive.iter().zip(&digits).map(|(&i, &d)| (i, branches[d as usize])).collect();
        let pick = |want: BiactiveBranch| -> Vec<usize> {
            choice.iter().filter(|(_, b)| *b == want).map(|(i, _)| *i).collect()
        };
        let (pos, gz, hz) =
            (pick(BiactiveBranch::BothPositive), pick(BiactiveBranch::GZero), pick(BiactiveBranch::HZero));
        let mut b = QueryBuilder::new(eval);
        b.nonneg(RowFamily::Ineq, &pattern.ineq, 1.0)
            .strict(RowFamily::CompG, &pos, -1.0)
            .strict(RowFamily::CompH, &pos, -1.0)
            .zero(RowFamily::CompG, &union(&gz, &pattern.h_only))
            .zero(RowFamily::CompH, &union(&hz, &pattern.g_only))
            .free(RowFamily::Eq, &all_eq(eval))
            .free(RowFamily::CompG, &union(&pattern.g_only, &hz))
            .free(RowFamily::CompH, &union(&pattern.h_only, &gz));
        let v = combination_verdict(CqName::Nnamcq, &b, tol, Some(choice))?;
        if v.verdict == Verdict::Fails {
            return Ok(v);
        }
    }
    let mut v = CqVerdict::new(CqName::Nnamcq, Verdict::Holds);
    v.notes.push(format!("{} branches without a nonzero abnormal multiplier", 3usize.pow(k as u32)));
    Ok(v)
}

fn unit(row: &[f64]) -> Vec<f64> {
    let s = row.iter().map(|x| x * x).sum::<f64>().sqrt();
    if s > 0.0 {
        row.iter().map(|x| x / s).collect()
    } else {
        row.to_vec()
    }
}

/// Largest `t` in `[0, 1]` admitting a direction `d` with `||d||_1 <= 1` and
///
/// ```text
///   eq rows:  a^T d  = 0
///   le rows:  a^T d <= 0   (a^T d <= -t when `strict_le`)
///   ge rows:  a^T d >= 0
///   strict:   a^T d >= t
/// ```
///
/// Rows are normalized to unit length first.
fn direction_margin(
    n: usize,
    eq: &[Vec<f64>],
    le: &[Vec<f64>],
    ge: &[Vec<f64>],
    strict_le: bool,
    strict_ge_row: Option<&[f64]>,
) -> Result<f64> {
    // Variables: d+ (n) | d- (n) | t.
    let t = 2 * n;
    let mut lp = LinearProgram::new(2 * n + 1);
    let dir = |a: &[f64]| -> Vec<f64> {
        let a = unit(a);
        let mut row = vec![0.0; 2 * n + 1];
        for k in 0..n {
            row[k] = a[k];
            row[n + k] = -a[k];
        }
        row
    };
    for a in eq {
        lp.add(dir(a), Relation::Eq, 0.0);
    }
    for a in le {
        let mut row = dir(a);
        if strict_le {
            row[t] = 1.0;
        }
        lp.add(row, Relation::Le, 0.0);
    }
    for a in ge {
        lp.add(dir(a), Relation::Ge, 0.0);
    }
    if let Some(a) = strict_ge_row {
        let mut row = dir(a);
        row[t] = -1.0;
        lp.add(row, Relation::Ge, 0.0);
    }
    let mut ball = vec![1.0; 2 * n + 1];
    ball[t] = 0.0;
    lp.add(ball, Relation::Le, 1.0);
    lp.add_sparse(&[(t, 1.0)], Relation::Le, 1.0);
    lp.set_objective(t, 1.0);
    match lp.solve()? {
        LpOutcome::Optimal { value, .. } => Ok(value),
        // d = 0, t = 0 is always feasible.
        other => Err(crate::error::Error::Lp(format!("direction LP returned {other:?}"))),
    }
}

/// Generalized MFCQ checked straight from its primal definition: one
/// direction-finding LP per partition of the biactive set (and per strict
/// candidate row), plus a rank test for every two-way partition.
pub fn check_mpec_gmfcq_direct(
    eval: &PointEvaluation,
    pattern: &ActivePattern,
    tol: &Tolerances,
    cap: usize,
) -> Result<CqVerdict> {
    let k = pattern.biactive.len();
    if k > cap {
        return Ok(cap_exceeded(CqName::MpecGmfcq, k, cap));
    }
    let n = eval.dims.n;
    let grads = |family: RowFamily, idx: &[usize]| -> Vec<Vec<f64>> {
        idx.iter().map(|&i| eval.grad(family, i).to_vec()).collect()
    };
    let g_rows = grads(RowFamily::Ineq, &pattern.ineq);
    let h_rows = grads(RowFamily::Eq, &all_eq(eval));

    for digits in ternary_assignments(k) {
        let part = |d: u8| -> Vec<usize> {
            pattern.biactive.iter().zip(&digits).filter(|(_, &x)| x == d).map(|(&i, _)| i).collect()
        };
        // P: H_i equality, Q: G_i equality, R: both inequalities.
        let (p, q, r) = (part(0), part(1), part(2));
        let mut eq = h_rows.clone();
        eq.extend(grads(RowFamily::CompG, &union(&pattern.g_only, &q)));
        eq.extend(grads(RowFamily::CompH, &union(&pattern.h_only, &p)));

        let failure = |condition: &str, margin: f64| {
            let mut v = CqVerdict::new(CqName::MpecGmfcq, Verdict::Fails);
            v.certificate = Some(Certificate::Partition {
                p: p.clone(),
                q: q.clone(),
                r: r.clone(),
                condition: condition.to_string(),
                margin,
            });
            v
        };

        if r.is_empty() {
            let rank = numerical_rank(&eq, n, tol.rank_rel_tol);
            if rank.rank < eq.len() {
                return Ok(failure("equality-type gradients linearly dependent", 0.0));
            }
            if !g_rows.is_empty() {
                let margin = direction_margin(n, &eq, &g_rows, &[], true, None)?;
                if margin < tol.strict_margin_eps {
                    return Ok(failure("no direction strictly decreasing every active g", margin));
                }
            }
        } else {
            let mut ge = grads(RowFamily::CompG, &r);
            ge.extend(grads(RowFamily::CompH, &r));
            let mut best = 0.0f64;
            for cand in &ge {
                best = best.max(direction_margin(n, &eq, &g_rows, &ge, false, Some(cand))?);
                if best >= tol.strict_margin_eps {
                    break;
                }
            }
            if best < tol.strict_margin_eps {
                return Ok(failure("no direction strictly increasing some G_i or H_i on R", best));
            }
        }
    }
    Ok(CqVerdict::new(CqName::MpecGmfcq, Verdict::Holds))
}

/// For affine data MPEC-ACQ holds at every feasible point; nothing is
/// claimed otherwise.
pub fn check_acq_affine(instance_is_affine: bool) -> CqVerdict {
    if instance_is_affine {
        let mut v = CqVerdict::new(CqName::MpecAcqAffine, Verdict::Holds);
        v.notes.push("all constraint functions affine".into());
        v
    } else {
        let mut v = CqVerdict::new(CqName::MpecAcqAffine, Verdict::Undecided);
        v.notes.push("nonlinear constraints: tangent-cone comparison not computed".into());
        v
    }
}

/// Checks every decided pair against the known implications
/// `LICQ => MFCQ-T => GMFCQ <=> NNAMCQ => MFCQ-R` (and `MFCQ-T => MFCQ-R`).
pub fn audit_implications(verdicts: &[CqVerdict]) -> Vec<ImplicationViolation> {
    let get = |cq: CqName| verdicts.iter().find(|v| v.cq == cq).map(|v| v.verdict);
    let edges = [
        (CqName::MpecLicq, CqName::MpecMfcqT),
        (CqName::MpecMfcqT, CqName::MpecGmfcq),
        (CqName::MpecMfcqT, CqName::Nnamcq),
        (CqName::MpecGmfcq, CqName::Nnamcq),
        (CqName::Nnamcq, CqName::MpecGmfcq),
        (CqName::MpecGmfcq, CqName::MpecMfcqR),
        (CqName::Nnamcq, CqName::MpecMfcqR),
        (CqName::MpecMfcqT, CqName::MpecMfcqR),
    ];
    edges
        .iter()
        .filter(|(a, b)| get(*a) == Some(Verdict::Holds) && get(*b) == Some(Verdict::Fails))
        .map(|&(premise, conclusion)| ImplicationViolation {
            premise,
            conclusion,
            detail: format!("{premise} holds but {conclusion} fails"),
        })
        .collect()
}

/// Runs every checker at one point and audits the result.
pub fn check_all(eval: &PointEvaluation, pattern: &ActivePattern, tol: &Tolerances, cap: usize) -> Result<CqReport> {
    let verdicts = vec![
        check_mpec_licq(eval, pattern, tol),
        check_mpec_mfcq_t(eval, pattern, tol)?,
        check_mpec_mfcq_r(eval, pattern, tol)?,
        check_nnamcq(eval, pattern, tol, cap)?,
        check_mpec_gmfcq_direct(eval, pattern, tol, cap)?,
        check_acq_affine(eval.affine),
    ];
    let implication_violations = audit_implications(&verdicts);
    Ok(CqReport { pattern: pattern.clone(), verdicts, implication_violations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::MpecDimensions;

    fn single_h_only() -> PointEvaluation {
        PointEvaluation {
            dims: MpecDimensions { n: 2, m: 0, p: 0, l: 1 },
            point: vec![1.0, 0.0],
            g_vals: vec![],
            h_vals: vec![],
            comp_g_vals: vec![1.0],
            comp_h_vals: vec![0.0],
            g_grads: vec![],
            h_grads: vec![],
            comp_g_grads: vec![vec![1.0, 0.0]],
            comp_h_grads: vec![vec![0.0, 1.0]],
            affine: true,
        }
    }

    #[test]
    fn single_nonzero_row_satisfies_licq() {
        let e = single_h_only();
        let pattern = ActivePattern { h_only: vec![0], ..Default::default() };
        assert_eq!(check_mpec_licq(&e, &pattern, &Tolerances::default()).verdict, Verdict::Holds);
    }

    #[test]
    fn interior_point_satisfies_everything() {
        let e = single_h_only();
        let pattern = ActivePattern::default();
        let tol = Tolerances::default();
        assert!(check_mpec_mfcq_t(&e, &pattern, &tol).unwrap().holds());
        assert!(check_nnamcq(&e, &pattern, &tol, 12).unwrap().holds());
        assert!(check_mpec_gmfcq_direct(&e, &pattern, &tol, 12).unwrap().holds());
    }

    #[test]
    fn ternary_enumeration_is_complete() {
        let all: Vec<_> = ternary_assignments(2).collect();
        assert_eq!(all.len(), 9);
        assert!(all.contains(&vec![2, 1]));
        assert_eq!(ternary_assignments(0).count(), 1);
    }

    #[test]
    fn synthetic_contradiction_is_flagged() {
        let verdicts =
            vec![CqVerdict::new(CqName::MpecLicq, Verdict::Holds), CqVerdict::new(CqName::MpecMfcqT, Verdict::Fails)];
        let v = audit_implications(&verdicts);
        assert_eq!(v.len(), 1);
        assert_eq!((v[0].premise, v[0].conclusion), (CqName::MpecLicq, CqName::MpecMfcqT));
    }

    #[test]
    fn undecided_verdicts_are_not_audited() {
        let verdicts = vec![
            CqVerdict::new(CqName::Nnamcq, Verdict::Undecided),
            CqVerdict::new(CqName::MpecGmfcq, Verdict::Holds),
            CqVerdict::new(CqName::MpecMfcqR, Verdict::Holds),
        ];
        assert!(audit_implications(&verdicts).is_empty());
    }

    #[test]
    fn cap_gives_undecided() {
        let e = single_h_only();
        let pattern = ActivePattern { biactive: vec![0], ..Default::default() };
        let mut e2 = e.clone();
        e2.comp_g_vals = vec![0.0];
        let v = check_nnamcq(&e2, &pattern, &Tolerances::default(), 0).unwrap();
        assert_eq!(v.verdict, Verdict::Undecided);
        let v = check_mpec_gmfcq_direct(&e2, &pattern, &Tolerances::default(), 0).unwrap();
        assert_eq!(v.verdict, Verdict::Undecided);
    }

    #[test]
    fn acq_affine_only() {
        assert_eq!(check_acq_affine(true).verdict, Verdict::Holds);
        assert_eq!(check_acq_affine(false).verdict, Verdict::Undecided);
    }
}
