//! Full analysis of one feasible point: generic checkers, closed-form
//! verdicts, and a record of every place the two are expected to agree.

use serde::{Deserialize, Serialize};

use super::gamma::{assemble_gamma, compare_with_bundle, GammaComparison};
use super::instance::BhoInstance;
use super::pattern::{check_index_relations, classify_lambda_psi, BlockIndexSets, LambdaPsiPattern};
use super::point::{validation_error, BhoPoint};
use super::theorems::{check_licq_theorem, check_mfcq_r_theorem, LicqTheoremVerdict};
use crate::cq::{check_all, CqName, CqReport, CqVerdict, Verdict};
use crate::error::{Error, Result};
use crate::kernels::numerical_rank;
use crate::model::{check_feasibility, classify_active, ActivePattern, FeasibilityReport, Tolerances};
use crate::stationarity::{classify_stationarity, StationarityVerdict};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaSummary {
    pub rows: usize,
    pub columns: usize,
    pub rank: usize,
    /// LICQ read off the rank of Γ.
    pub licq: Verdict,
    pub closed_form_row_count: usize,
    pub quoted_row_count: usize,
    pub comparison: GammaComparison,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgreementRecord {
    pub check: String,
    pub expected: String,
    pub observed: String,
    pub agrees: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BhoAnalysis {
    #[serde(rename = "C")]
    pub c: f64,
    pub feasibility: FeasibilityReport,
    pub active: ActivePattern,
    pub lambda_psi: LambdaPsiPattern,
    pub block_sets: BlockIndexSets,
    pub cq: CqReport,
    pub stationarity: StationarityVerdict,
    pub mfcq_r_theorem: CqVerdict,
    pub licq_theorem: LicqTheoremVerdict,
    pub gamma: GammaSummary,
    pub index_relation_mismatches: Vec<String>,
    pub validation_error: f64,
    /// Misclassified validation samples over `T m1`, from explicit weight vectors.
    pub direct_error: f64,
    pub agreement: Vec<AgreementRecord>,
}

impl BhoAnalysis {
    pub fn mismatches(&self) -> Vec<&AgreementRecord> {
        self.agreement.iter().filter(|a| !a.agrees).collect()
    }
}

/// Misclassification rate computed from `w_t = sum_j alpha_j y_j x_j` per
/// fold, independently of the stacked `A B^T`.
pub fn direct_misclassification_rate(inst: &BhoInstance, point: &BhoPoint, tol: &Tolerances) -> f64 {
    let d = inst.data();
    let mut wrong = 0usize;
    for t in 0..d.folds {
        let mut w = vec![0.0; d.features];
        for (r, row) in d.training_rows[t].iter().enumerate() {
            let a = point.alpha[t * d.m2 + r];
            w.iter_mut().zip(row).for_each(|(wk, x)| *wk += a * x);
        }
        for row in &d.validation_rows[t] {
            let margin: f64 = row.iter().zip(&w).map(|(x, wk)| x * wk).sum();
            if margin < -tol.activity_eps {
                wrong += 1;
            }
        }
    }
    wrong as f64 / inst.n_val() as f64
}

fn record(check: &str, expected: impl ToString, observed: impl ToString, agrees: bool) -> AgreementRecord {
    AgreementRecord { check: check.into(), expected: expected.to_string(), observed: observed.to_string(), agrees }
}

fn name(v: Option<Verdict>) -> String {
    v.map_or("missing".into(), |v| format!("{v:?}").to_lowercase())
}

pub fn analyze_bho_point(inst: &BhoInstance, point: &BhoPoint, tol: &Tolerances, cap: usize) -> Result<BhoAnalysis> {
    let eval = inst.evaluate(point)?;
    let feasibility = check_feasibility(&eval, tol)?;
    if let Some(v) = feasibility.violating_constraints.first() {
        let (block, index) = inst.block_of_pair(v.index);
        return Err(Error::InfeasibleConstruction {
            family: format!("{:?} in block {block}", v.family),
            index,
            residual: v.residual,
        });
    }
    let active = classify_active(&eval, tol)?;
    let lambda_psi = classify_lambda_psi(inst, point, tol)?;
    let block_sets = BlockIndexSets::from_active(inst, &active);
    let cq = check_all(&eval, &active, tol, cap)?;
    let stationarity = classify_stationarity(&eval, &active, &inst.c_vec(), tol, cap)?;
    let mfcq_r_theorem = check_mfcq_r_theorem(inst, &lambda_psi, tol)?;
    let licq_theorem = check_licq_theorem(inst, &lambda_psi, tol)?;

    let gamma_m = assemble_gamma(inst, point, &lambda_psi, tol);
    let stacked = gamma_m.stacked();
    let rank = numerical_rank(&stacked, inst.n(), tol.rank_rel_tol).rank;
    let gamma = GammaSummary {
        rows: stacked.len(),
        columns: inst.n(),
        rank,
        licq: if rank == stacked.len() { Verdict::Holds } else { Verdict::Fails },
        closed_form_row_count: gamma_m.closed_form_row_count,
        quoted_row_count: gamma_m.quoted_row_count,
        comparison: compare_with_bundle(&gamma_m, &eval, &active),
    };
    let index_relation_mismatches = check_index_relations(&lambda_psi, &block_sets);
    let validation_error = validation_error(inst, point);
    let direct_error = direct_misclassification_rate(inst, point, tol);

    let generic_licq = cq.verdict(CqName::MpecLicq);
    let generic_mfcq_t = cq.verdict(CqName::MpecMfcqT);
    let generic_mfcq_r = cq.verdict(CqName::MpecMfcqR);
    let mut agreement = vec![
        record("mfcq_t_equals_licq", name(generic_licq), name(generic_mfcq_t), generic_licq == generic_mfcq_t),
        record(
            "gamma_rank_equals_generic_licq",
            name(generic_licq),
            name(Some(gamma.licq)),
            generic_licq == Some(gamma.licq),
        ),
        record(
            "gamma_matches_bundle",
            format!("{} rows", gamma.comparison.accounting_row_count),
            format!("{} rows, entrywise {}", gamma.rows, gamma.comparison.entrywise_match),
            gamma.comparison.matches(),
        ),
        record("objective_equals_direct_count", direct_error, validation_error, direct_error == validation_error),
        record(
            "implication_lattice",
            "no violations",
            format!("{} violations", cq.implication_violations.len()),
            cq.implication_violations.is_empty(),
        ),
        record(
            "stationarity_monotonicity",
            "no violations",
            format!("{} violations", stationarity.monotonicity_violations.len()),
            stationarity.monotonicity_violations.is_empty(),
        ),
    ];
    if licq_theorem.verdict.is_decided() {
        let t = Some(licq_theorem.verdict.verdict);
        agreement.push(record("licq_theorem_vs_generic", name(t), name(generic_licq), t == generic_licq));
        agreement.push(record("licq_theorem_vs_gamma_rank", name(t), name(Some(gamma.licq)), t == Some(gamma.licq)));
    }
    if mfcq_r_theorem.holds() {
        agreement.push(record(
            "mfcq_r_theorem_sufficiency",
            "holds",
            name(generic_mfcq_r),
            generic_mfcq_r == Some(Verdict::Holds),
        ));
    }
    if lambda_psi.flags.is_clean() {
        agreement.push(record(
            "index_relations",
            "all twelve equalities",
            format!("{} mismatches", index_relation_mismatches.len()),
            index_relation_mismatches.is_empty(),
        ));
    }
    if active.biactive.is_empty() {
        agreement.push(record(
            "mfcq_t_equals_mfcq_r",
            name(generic_mfcq_t),
            name(generic_mfcq_r),
            generic_mfcq_t == generic_mfcq_r,
        ));
    }

    Ok(BhoAnalysis {
        c: point.c,
        feasibility,
        active,
        lambda_psi,
        block_sets,
        cq,
        stationarity,
        mfcq_r_theorem,
        licq_theorem,
        gamma,
        index_relation_mismatches,
        validation_error,
        direct_error,
        agreement,
    })
}
