//! Machine-readable reports. Every report is JSON with sorted keys, so two
//! runs on the same input, seed and tolerances produce identical bytes.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bho::{
    analyze_bho_point, AgreementRecord, BhoAnalysis, BhoInstance, BhoPoint, BlockIndexSets, GammaSummary,
    LambdaPsiPattern, LicqTheoremVerdict,
};
use crate::cq::{check_all, CqReport, CqVerdict};
use crate::error::{Error, Result};
use crate::fuzz::generated_point;
use crate::model::{check_feasibility, classify_active, ActivePattern, FeasibilityReport, PointEvaluation, Tolerances};
use crate::stationarity::{classify_stationarity, verify_kkt_equivalence, StationarityVerdict};

/// Routes through `serde_json::Value`, whose maps are ordered by key.
fn canonical<T: Serialize>(value: &T) -> serde_json::Value {
    serde_json::to_value(value).expect("report types serialize to JSON")
}

/// Hex SHA-256 of the compact canonical JSON.
pub fn digest<T: Serialize>(value: &T) -> String {
    hex::encode(Sha256::digest(canonical(value).to_string().as_bytes()))
}

/// Pretty JSON with sorted keys and a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(&canonical(value)).expect("value serializes");
    s.push('\n');
    s
}

/// A point evaluation plus an optional objective gradient.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRecord {
    #[serde(flatten)]
    pub eval: PointEvaluation,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grad_f: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum CheckInput {
    Evaluation(EvaluationRecord),
    Bho { instance: BhoInstance, point: BhoPoint },
}

impl CheckInput {
    /// `text` is either an evaluation record, a document holding both
    /// `instance` and `point`, or an instance document paired with a separate
    /// point document.
    pub fn parse(text: &str, point: Option<&str>) -> Result<Self> {
        let doc: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let parse = |v: serde_json::Value, what: &str| -> Result<serde_json::Value> {
            v.get(what).cloned().ok_or_else(|| Error::Parse(format!("missing field `{what}`")))
        };
        if let Some(p) = point {
            let instance = serde_json::from_value(parse(doc, "instance")?).map_err(|e| Error::Parse(e.to_string()))?;
            return Ok(CheckInput::Bho { instance, point: BhoPoint::from_json(p)? });
        }
        if doc.get("instance").is_some() {
            let instance =
                serde_json::from_value(parse(doc.clone(), "instance")?).map_err(|e| Error::Parse(e.to_string()))?;
            let point = serde_json::from_value(parse(doc, "point")?).map_err(|e| Error::Parse(e.to_string()))?;
            return Ok(CheckInput::Bho { instance, point });
        }
        let record: EvaluationRecord = serde_json::from_value(doc).map_err(|e| Error::Parse(e.to_string()))?;
        record.eval.validate()?;
        if let Some(g) = &record.grad_f {
            if g.len() != record.eval.dims.n {
                return Err(Error::Dimension(format!("grad_f: length {}, expected {}", g.len(), record.eval.dims.n)));
            }
        }
        Ok(CheckInput::Evaluation(record))
    }
}

/// SVC-specific part of a report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BhoSection {
    #[serde(rename = "C")]
    pub c: f64,
    pub lambda_psi: LambdaPsiPattern,
    pub block_sets: BlockIndexSets,
    pub mfcq_r_theorem: CqVerdict,
    pub licq_theorem: LicqTheoremVerdict,
    pub gamma: GammaSummary,
    pub index_relation_mismatches: Vec<String>,
    pub validation_error: f64,
    pub direct_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub instance_digest: Option<String>,
    pub point_digest: String,
    pub feasibility: FeasibilityReport,
    pub active: Option<ActivePattern>,
    pub cq: Option<CqReport>,
    pub stationarity: Option<StationarityVerdict>,
    /// Strong stationarity against the KKT system of the nonlinear program.
    pub kkt_equivalence: Option<bool>,
    pub bho: Option<BhoSection>,
    pub agreement: Vec<AgreementRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timing_ms: Option<f64>,
}

impl AnalysisReport {
    /// Feasible, and no invariant the run could test was violated.
    pub fn passed(&self) -> bool {
        self.feasibility.feasible
            && self.cq.as_ref().is_some_and(|c| c.implication_violations.is_empty())
            && self.stationarity.as_ref().is_none_or(|s| s.monotonicity_violations.is_empty())
            && self.kkt_equivalence != Some(false)
            && self.agreement.iter().all(|a| a.agrees)
    }
}

fn infeasible(instance_digest: Option<String>, point_digest: String, feasibility: FeasibilityReport) -> AnalysisReport {
    AnalysisReport {
        instance_digest,
        point_digest,
        feasibility,
        active: None,
        cq: None,
        stationarity: None,
        kkt_equivalence: None,
        bho: None,
        agreement: Vec::new(),
        timing_ms: None,
    }
}

/// Full analysis of one point. `grad_f` overrides the gradient carried by
/// the input; the SVC objective gradient is used for instance/point input.
pub fn run_check(
    input: &CheckInput,
    grad_f: Option<&[f64]>,
    tol: &Tolerances,
    cap: usize,
    timing: bool,
) -> Result<AnalysisReport> {
    tol.validate()?;
    let start = Instant::now();
    let mut report = match input {
        CheckInput::Evaluation(rec) => {
            let eval = &rec.eval;
            let point_digest = digest(eval);
            let feasibility = check_feasibility(eval, tol)?;
            if !feasibility.feasible {
                return Ok(infeasible(None, point_digest, feasibility));
            }
            let active = classify_active(eval, tol)?;
            let cq = check_all(eval, &active, tol, cap)?;
            let (stationarity, kkt_equivalence) = match grad_f.or(rec.grad_f.as_deref()) {
                Some(g) => {
                    if g.len() != eval.dims.n {
                        return Err(Error::Dimension(format!("grad_f: length {}, expected {}", g.len(), eval.dims.n)));
                    }
                    (
                        Some(classify_stationarity(eval, &active, g, tol, cap)?),
                        Some(verify_kkt_equivalence(eval, &active, g, tol)?),
                    )
                }
                None => (None, None),
            };
            AnalysisReport {
                instance_digest: None,
                point_digest,
                feasibility,
                active: Some(active),
                cq: Some(cq),
                stationarity,
                kkt_equivalence,
                bho: None,
                agreement: Vec::new(),
                timing_ms: None,
            }
        }
        CheckInput::Bho { instance, point } => {
            instance.check_point_dims(point)?;
            let (instance_digest, point_digest) = (Some(digest(instance)), digest(point));
            let eval = instance.evaluate(point)?;
            let feasibility = check_feasibility(&eval, tol)?;
            if !feasibility.feasible {
                return Ok(infeasible(instance_digest, point_digest, feasibility));
            }
            let a = analyze_bho_point(instance, point, tol, cap)?;
            let (stationarity, kkt_equivalence) = match grad_f {
                Some(g) => {
                    if g.len() != instance.n() {
                        return Err(Error::Dimension(format!("grad_f: length {}, expected {}", g.len(), instance.n())));
                    }
                    (
                        classify_stationarity(&eval, &a.active, g, tol, cap)?,
                        verify_kkt_equivalence(&eval, &a.active, g, tol)?,
                    )
                }
                None => (a.stationarity.clone(), verify_kkt_equivalence(&eval, &a.active, &instance.c_vec(), tol)?),
            };
            bho_report(a, instance_digest, point_digest, stationarity, kkt_equivalence)
        }
    };
    if timing {
        report.timing_ms = Some(start.elapsed().as_secs_f64() * 1e3);
    }
    Ok(report)
}

fn bho_report(
    a: BhoAnalysis,
    instance_digest: Option<String>,
    point_digest: String,
    stationarity: StationarityVerdict,
    kkt_equivalence: bool,
) -> AnalysisReport {
    AnalysisReport {
        instance_digest,
        point_digest,
        feasibility: a.feasibility,
        active: Some(a.active),
        cq: Some(a.cq),
        stationarity: Some(stationarity),
        kkt_equivalence: Some(kkt_equivalence),
        bho: Some(BhoSection {
            c: a.c,
            lambda_psi: a.lambda_psi,
            block_sets: a.block_sets,
            mfcq_r_theorem: a.mfcq_r_theorem,
            licq_theorem: a.licq_theorem,
            gamma: a.gamma,
            index_relation_mismatches: a.index_relation_mismatches,
            validation_error: a.validation_error,
            direct_error: a.direct_error,
        }),
        agreement: a.agreement,
        timing_ms: None,
    }
}

/// What `bho build` writes: the instance itself plus the assembled affine
/// data `G(v) = P v + a`, `H(v) = Q v`, objective `c^T v`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceExport {
    pub digest: String,
    pub n: usize,
    pub instance: BhoInstance,
    #[serde(rename = "P")]
    pub p: Vec<Vec<f64>>,
    #[serde(rename = "Q")]
    pub q: Vec<Vec<f64>>,
    pub a: Vec<f64>,
    pub c: Vec<f64>,
}

impl InstanceExport {
    pub fn new(instance: &BhoInstance) -> Self {
        let rows = |m: nalgebra::DMatrix<f64>| crate::kernels::dense::to_rows(&m);
        InstanceExport {
            digest: digest(instance),
            n: instance.n(),
            p: rows(instance.p_matrix()),
            q: rows(instance.q_matrix()),
            a: instance.a_vec(),
            c: instance.c_vec(),
            instance: instance.clone(),
        }
    }
}

/// `count` points log-spaced over `[lo, hi]`, endpoints included.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi >= lo && lo.is_finite() && hi.is_finite()) || count == 0 {
        return Err(Error::Parse(format!("invalid C grid [{lo}, {hi}] x {count}")));
    }
    if count == 1 {
        return Ok(vec![lo]);
    }
    let ratio = hi / lo;
    let last = count - 1;
    Ok((0..count).map(|k| if k == last { hi } else { lo * ratio.powf(k as f64 / last as f64) }).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    #[serde(rename = "C")]
    pub c: f64,
    pub point: Option<BhoPoint>,
    pub report: Option<AnalysisReport>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub instance_digest: String,
    pub entries: Vec<SweepEntry>,
}

impl SweepReport {
    pub fn passed(&self) -> bool {
        self.entries.iter().all(|e| e.report.as_ref().is_some_and(AnalysisReport::passed))
    }
}

/// Solves the lower level at every grid value and analyzes the resulting
/// point. Grid values are independent and run in parallel.
pub fn run_sweep(instance: &BhoInstance, grid: &[f64], tol: &Tolerances, cap: usize, with_points: bool) -> SweepReport {
    let entries = grid
        .par_iter()
        .map(|&c| {
            let run = || -> Result<(BhoPoint, AnalysisReport)> {
                let point = generated_point(instance, c, tol)?;
                let input = CheckInput::Bho { instance: instance.clone(), point: point.clone() };
                Ok((point, run_check(&input, None, tol, cap, false)?))
            };
            match run() {
                Ok((p, r)) => SweepEntry { c, point: with_points.then_some(p), report: Some(r), error: None },
                Err(e) => SweepEntry { c, point: None, report: None, error: Some(e.to_string()) },
            }
        })
        .collect();
    SweepReport { instance_digest: digest(instance), entries }
}
