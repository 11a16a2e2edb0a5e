//! Closed-form constraint-qualification verdicts for the SVC hyperparameter
//! MPEC, decided from the refined index sets and Gram sub-blocks alone.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::instance::BhoInstance;
use super::pattern::{sorted_union, LambdaPsiPattern};
use crate::cq::{CqName, CqVerdict, Verdict};
use crate::error::Result;
use crate::kernels::dense::submatrix;
use crate::kernels::is_positive_definite;
use crate::kernels::pd::solve_spd;
use crate::model::Tolerances;

fn verdict(cq: CqName, verdict: Verdict, note: impl Into<String>) -> CqVerdict {
    CqVerdict { cq, verdict, certificate: None, notes: vec![note.into()] }
}

/// MFCQ-R holds whenever the Gram block on `lambda1 u lambda3` is positive
/// definite and every validation index classifies cleanly. The condition is
/// only sufficient, so anything else is undecided.
pub fn check_mfcq_r_theorem(inst: &BhoInstance, pat: &LambdaPsiPattern, tol: &Tolerances) -> Result<CqVerdict> {
    if pat.flags.degenerate_c {
        return Ok(verdict(CqName::MpecMfcqR, Verdict::Undecided, "C is zero within tolerance"));
    }
    if !pat.flags.is_clean() {
        return Ok(verdict(
            CqName::MpecMfcqR,
            Verdict::Undecided,
            "distinct-classification monitor flagged this point",
        ));
    }
    let idx = sorted_union(&[&pat.lambda1, &pat.lambda3_plus, &pat.lambda3_c]);
    let block = submatrix(inst.bbt(), &idx, &idx);
    Ok(if is_positive_definite(&block, tol.pd_eps)? {
        verdict(CqName::MpecMfcqR, Verdict::Holds, format!("Gram block on {} indices is positive definite", idx.len()))
    } else {
        verdict(CqName::MpecMfcqR, Verdict::Undecided, "Gram block on lambda1 u lambda3 is singular")
    })
}

/// Which branch of the closed-form LICQ characterization applied.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum LicqCase {
    /// More than one biactive pair: fails.
    I,
    /// No biactive pair: holds.
    II,
    /// One biactive pair from `lambda1` with nonzero reduced coupling: holds.
    III,
    /// One biactive pair from `lambda3_c` with nonzero reduced coupling: holds.
    IV,
    /// One biactive pair whose reduced coupling vanishes: fails.
    V,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LicqTheoremVerdict {
    pub verdict: CqVerdict,
    pub case: Option<LicqCase>,
    /// Reduced coupling scalar of the single biactive index, when computed.
    pub a_hat: Option<f64>,
}

/// `K(i, S) 1 - K(i, L) K(L, L)^{-1} K(L, S) 1` with `L = lambda3_plus`.
fn reduced_coupling(k: &DMatrix<f64>, i: usize, lp: &[usize], s: &[usize]) -> Result<f64> {
    let row_sum = |r: usize| -> f64 { s.iter().map(|&c| k[(r, c)]).sum() };
    let direct = row_sum(i);
    if lp.is_empty() {
        return Ok(direct);
    }
    let kll = submatrix(k, lp, lp);
    let kli = DMatrix::from_fn(lp.len(), 1, |r, _| k[(lp[r], i)]);
    let x = solve_spd(&kll, &kli)?;
    let rhs = DVector::from_fn(lp.len(), |r, _| row_sum(lp[r]));
    Ok(direct - x.column(0).dot(&rhs))
}

pub fn check_licq_theorem(inst: &BhoInstance, pat: &LambdaPsiPattern, tol: &Tolerances) -> Result<LicqTheoremVerdict> {
    let cq = CqName::MpecLicq;
    let undecided =
        |note: &str| LicqTheoremVerdict { verdict: verdict(cq, Verdict::Undecided, note), case: None, a_hat: None };
    if !pat.flags.is_clean() {
        return Ok(undecided("distinct-classification monitor flagged this point"));
    }
    let biactive = pat.i_gh3.len() + pat.i_gh4.len();
    if biactive > 1 {
        return Ok(LicqTheoremVerdict {
            verdict: verdict(cq, Verdict::Fails, format!("{biactive} biactive pairs")),
            case: Some(LicqCase::I),
            a_hat: None,
        });
    }
    let k = inst.bbt();
    let lp = &pat.lambda3_plus;
    if !is_positive_definite(&submatrix(k, lp, lp), tol.pd_eps)? {
        return Ok(undecided("Gram block on lambda3_plus is not positive definite"));
    }
    if biactive == 0 {
        return Ok(LicqTheoremVerdict {
            verdict: verdict(cq, Verdict::Holds, "no biactive pair"),
            case: Some(LicqCase::II),
            a_hat: None,
        });
    }
    let (i, cols, case) = if let Some(&i) = pat.i_gh3.first() {
        (i, pat.lambda_u.clone(), LicqCase::III)
    } else {
        (pat.i_gh4[0], sorted_union(&[&pat.lambda3_c, &pat.lambda_u]), LicqCase::IV)
    };
    let a_hat = reduced_coupling(k, i, lp, &cols)?;
    let (v, case) = if a_hat.abs() > tol.activity_eps {
        (verdict(cq, Verdict::Holds, format!("reduced coupling {a_hat:e} is nonzero")), case)
    } else {
        (verdict(cq, Verdict::Fails, format!("reduced coupling {a_hat:e} vanishes")), LicqCase::V)
    };
    Ok(LicqTheoremVerdict { verdict: v, case: Some(case), a_hat: Some(a_hat) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bho::pattern::AssumptionFlags;

    fn inst() -> BhoInstance {
        BhoInstance::from_rows(vec![vec![vec![1.0, 0.0]]], vec![vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]]])
            .unwrap()
    }

    #[test]
    fn empty_block_is_pd_so_mfcq_r_holds() {
        let pat = LambdaPsiPattern { lambda2: vec![0, 1, 2], ..Default::default() };
        let v = check_mfcq_r_theorem(&inst(), &pat, &Tolerances::default()).unwrap();
        assert_eq!(v.verdict, Verdict::Holds);
    }

    #[test]
    fn dependent_rows_leave_mfcq_r_undecided() {
        let pat = LambdaPsiPattern { lambda3_plus: vec![0, 1, 2], ..Default::default() };
        let v = check_mfcq_r_theorem(&inst(), &pat, &Tolerances::default()).unwrap();
        assert_eq!(v.verdict, Verdict::Undecided);
    }

    #[test]
    fn two_biactive_pairs_fail() {
        let pat = LambdaPsiPattern {
            lambda1: vec![0],
            i_gh3: vec![0],
            lambda3_c: vec![1],
            i_gh4: vec![1],
            ..Default::default()
        };
        let v = check_licq_theorem(&inst(), &pat, &Tolerances::default()).unwrap();
        assert_eq!((v.verdict.verdict, v.case), (Verdict::Fails, Some(LicqCase::I)));
    }

    #[test]
    fn flagged_point_is_undecided() {
        let pat = LambdaPsiPattern {
            flags: AssumptionFlags { i_gh1: vec![0], unclassified_validation: vec![0], ..Default::default() },
            ..Default::default()
        };
        let v = check_licq_theorem(&inst(), &pat, &Tolerances::default()).unwrap();
        assert_eq!(v.verdict.verdict, Verdict::Undecided);
    }

    #[test]
    fn lambda1_without_bounded_duals_fails() {
        let pat = LambdaPsiPattern { lambda1: vec![2], i_gh3: vec![2], lambda3_plus: vec![0, 1], ..Default::default() };
        let v = check_licq_theorem(&inst(), &pat, &Tolerances::default()).unwrap();
        assert_eq!(v.case, Some(LicqCase::V));
        assert_eq!(v.a_hat, Some(0.0));
    }

    #[test]
    fn lambda1_with_bounded_dual_holds() {
        // K = [[1,0,1],[0,1,1],[1,1,2]]; i = 2, lambda3_plus = {0}, lambda_u = {1}:
        // a_hat = K(2,1) - K(2,0) K(0,0)^{-1} K(0,1) = 1.
        let pat = LambdaPsiPattern {
            lambda1: vec![2],
            i_gh3: vec![2],
            lambda3_plus: vec![0],
            lambda_u: vec![1],
            ..Default::default()
        };
        let v = check_licq_theorem(&inst(), &pat, &Tolerances::default()).unwrap();
        assert_eq!(v.case, Some(LicqCase::III));
        assert!((v.a_hat.unwrap() - 1.0).abs() < 1e-12);
    }
}
