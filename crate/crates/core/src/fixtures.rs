//! Three small MPECs, all evaluated at the origin, that separate the
//! constraint qualifications from each other.
//!
//! | fixture | constraints                                        | expected                       |
//! |---------|----------------------------------------------------|--------------------------------|
//! | `E1`    | `v1 <= 0`, `v1 + v2 <= 0`, `0 <= v2 _|_ v3 >= 0`   | MFCQ-T holds, LICQ fails       |
//! | `E2`    | `-v1 - v2 <= 0`, `0 <= v1 _|_ v2 >= 0`             | NNAMCQ, GMFCQ hold; MFCQ-T fails |
//! | `E3`    | `0 <= v1 _|_ v2 >= 0`, `0 <= v1 - v2^2 _|_ v3 >= 0` | MFCQ-R holds, NNAMCQ fails     |

use serde::{Deserialize, Serialize};

use crate::cq::{check_all, CqName, CqReport, Verdict, DEFAULT_BIACTIVE_CAP};
use crate::error::Result;
use crate::model::{classify_active, MpecDimensions, PointEvaluation, Tolerances};
use crate::stationarity::{classify_stationarity, StationarityVerdict};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fixture {
    pub name: String,
    pub eval: PointEvaluation,
    pub grad_f: Vec<f64>,
    pub expected: Vec<(CqName, Verdict)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixtureResult {
    pub name: String,
    pub passed: bool,
    pub mismatches: Vec<String>,
    pub report: CqReport,
    pub stationarity: StationarityVerdict,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixtureSummary {
    pub passed: usize,
    pub total: usize,
    pub results: Vec<FixtureResult>,
}

impl FixtureSummary {
    pub fn all_passed(&self) -> bool {
        self.passed == self.total
    }
}

fn origin(n: usize) -> Vec<f64> {
    vec![0.0; n]
}

pub fn e1() -> Fixture {
    Fixture {
        name: "E1".into(),
        eval: PointEvaluation {
            dims: MpecDimensions { n: 3, m: 2, p: 0, l: 1 },
            point: origin(3),
            g_vals: vec![0.0, 0.0],
            h_vals: vec![],
            comp_g_vals: vec![0.0],
            comp_h_vals: vec![0.0],
            g_grads: vec![vec![1.0, 0.0, 0.0], vec![1.0, 1.0, 0.0]],
            h_grads: vec![],
            comp_g_grads: vec![vec![0.0, 1.0, 0.0]],
            comp_h_grads: vec![vec![0.0, 0.0, 1.0]],
            affine: true,
        },
        grad_f: vec![0.0, 1.0, 1.0],
        expected: vec![(CqName::MpecMfcqT, Verdict::Holds), (CqName::MpecLicq, Verdict::Fails)],
    }
}

pub fn e2() -> Fixture {
    Fixture {
        name: "E2".into(),
        eval: PointEvaluation {
            dims: MpecDimensions { n: 2, m: 1, p: 0, l: 1 },
            point: origin(2),
            g_vals: vec![0.0],
            h_vals: vec![],
            comp_g_vals: vec![0.0],
            comp_h_vals: vec![0.0],
            g_grads: vec![vec![-1.0, -1.0]],
            h_grads: vec![],
            comp_g_grads: vec![vec![1.0, 0.0]],
            comp_h_grads: vec![vec![0.0, 1.0]],
            affine: true,
        },
        grad_f: vec![1.0, 1.0],
        expected: vec![
            (CqName::Nnamcq, Verdict::Holds),
            (CqName::MpecGmfcq, Verdict::Holds),
            (CqName::MpecMfcqT, Verdict::Fails),
        ],
    }
}

pub fn e3() -> Fixture {
    Fixture {
        name: "E3".into(),
        eval: PointEvaluation {
            dims: MpecDimensions { n: 3, m: 0, p: 0, l: 2 },
            point: origin(3),
            g_vals: vec![],
            h_vals: vec![],
            comp_g_vals: vec![0.0, 0.0],
            comp_h_vals: vec![0.0, 0.0],
            g_grads: vec![],
            h_grads: vec![],
            // v1 - v2^2 has gradient (1, -2 v2, 0) = (1, 0, 0) at the origin.
            comp_g_grads: vec![vec![1.0, 0.0, 0.0], vec![1.0, 0.0, 0.0]],
            comp_h_grads: vec![vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]],
            affine: false,
        },
        grad_f: vec![1.0, 1.0, 1.0],
        expected: vec![(CqName::MpecMfcqR, Verdict::Holds), (CqName::Nnamcq, Verdict::Fails)],
    }
}

pub fn all() -> Vec<Fixture> {
    vec![e1(), e2(), e3()]
}

pub fn run_fixture(fixture: &Fixture, tol: &Tolerances) -> Result<FixtureResult> {
    fixture.eval.validate()?;
    let pattern = classify_active(&fixture.eval, tol)?;
    let report = check_all(&fixture.eval, &pattern, tol, DEFAULT_BIACTIVE_CAP)?;
    let stationarity = classify_stationarity(&fixture.eval, &pattern, &fixture.grad_f, tol, DEFAULT_BIACTIVE_CAP)?;
    let mut mismatches = Vec::new();
    for &(cq, want) in &fixture.expected {
        let got = report.verdict(cq);
        if got != Some(want) {
            mismatches.push(format!("{}: {cq} expected {want:?}, got {got:?}", fixture.name));
        }
    }
    for v in &report.implication_violations {
        mismatches.push(format!("{}: {}", fixture.name, v.detail));
    }
    Ok(FixtureResult { name: fixture.name.clone(), passed: mismatches.is_empty(), mismatches, report, stationarity })
}

pub fn run_fixtures(tol: &Tolerances) -> Result<FixtureSummary> {
    let results = all().iter().map(|f| run_fixture(f, tol)).collect::<Result<Vec<_>>>()?;
    let passed = results.iter().filter(|r| r.passed).count();
    Ok(FixtureSummary { passed, total: results.len(), results })
}
