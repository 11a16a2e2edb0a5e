//! Randomized cross-checking of every checker against every other.
//!
//! Each fuzz iteration `i` is driven by its own seed `seed + i`, so any
//! reported failure reproduces with `fuzz --n 1 --seed <that seed>`.
//! An iteration draws
//!
//! * a handful of small affine MPECs with integer data and designed activity,
//! * one random SVC hyperparameter instance evaluated on a grid of `C`,
//! * pattern-forced variants of that instance that hit biactive
//!   configurations random points almost never reach.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bho::{
    analyze_bho_point, assemble_feasible_point, classify_lambda_psi, natural_residual, solve_lower_level, BhoAnalysis,
    BhoInstance, BhoPoint, Dataset, FoldSplit, QpOptions,
};
use crate::cq::{check_all, Verdict};
use crate::error::{Error, Result};
use crate::model::{check_feasibility, classify_active, AffineMap, AffineMpec, Tolerances};
use crate::report::digest;
use crate::stationarity::{classify_stationarity, verify_kkt_equivalence, StationarityClass};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FuzzConfig {
    /// Number of iterations.
    pub iterations: usize,
    pub seed: u64,
    pub tol: Tolerances,
    pub cap: usize,
    pub affine_per_iteration: usize,
    pub c_grid: Vec<f64>,
    pub forced: bool,
}

impl Default for FuzzConfig {
    fn default() -> Self {
        Self {
            iterations: 200,
            seed: 42,
            tol: Tolerances::default(),
            cap: crate::cq::DEFAULT_BIACTIVE_CAP,
            affine_per_iteration: 5,
            c_grid: vec![0.01, 0.1, 1.0, 10.0, 100.0],
            forced: true,
        }
    }
}

/// Designed biactive configurations for the SVC instance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForcedKind {
    /// One zero dual moved exactly onto the margin, at moderate `C`.
    Lambda1,
    /// The same at large `C`, where no dual sits at its bound.
    Lambda1LargeC,
    /// Two zero duals moved onto the margin.
    TwoLambda1,
    /// `C` lowered to the largest dual of a separable solve.
    Lambda3c,
    /// Both of the above.
    Lambda1AndLambda3c,
    /// Two identical training samples in one fold.
    DuplicateRows,
}

impl ForcedKind {
    pub const ALL: [ForcedKind; 6] = [
        ForcedKind::Lambda1,
        ForcedKind::Lambda1LargeC,
        ForcedKind::TwoLambda1,
        ForcedKind::Lambda3c,
        ForcedKind::Lambda1AndLambda3c,
        ForcedKind::DuplicateRows,
    ];
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FuzzViolation {
    pub seed: u64,
    pub instance_digest: String,
    pub source: String,
    pub check: String,
    pub detail: String,
    pub reproduce: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FuzzSummary {
    pub seed: u64,
    pub iterations: usize,
    pub affine_points: usize,
    pub bho_points: usize,
    pub forced_attempts: usize,
    pub forced_points: usize,
    pub forced_by_kind: BTreeMap<String, usize>,
    /// Branch of the closed-form LICQ characterization hit, over forced points.
    pub licq_cases_forced: BTreeMap<String, usize>,
    /// The same over every SVC point.
    pub licq_cases_all: BTreeMap<String, usize>,
    pub licq_theorem_undecided: usize,
    pub mfcq_r_theorem_holds: usize,
    pub mfcq_r_theorem_undecided: usize,
    pub flagged_points: usize,
    pub strict_complementarity_points: usize,
    pub kkt_equivalence_checks: usize,
    pub stationarity_classes: BTreeMap<String, usize>,
    /// `[holds, fails, undecided]` per constraint qualification.
    pub verdict_counts: BTreeMap<String, [usize; 3]>,
    pub violations: Vec<FuzzViolation>,
}

impl FuzzSummary {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    fn absorb(&mut self, o: FuzzSummary) {
        self.affine_points += o.affine_points;
        self.bho_points += o.bho_points;
        self.forced_attempts += o.forced_attempts;
        self.forced_points += o.forced_points;
        let merge = |a: &mut BTreeMap<String, usize>, b: BTreeMap<String, usize>| {
            for (k, v) in b {
                *a.entry(k).or_default() += v;
            }
        };
        merge(&mut self.forced_by_kind, o.forced_by_kind);
        merge(&mut self.licq_cases_forced, o.licq_cases_forced);
        merge(&mut self.licq_cases_all, o.licq_cases_all);
        merge(&mut self.stationarity_classes, o.stationarity_classes);
        self.licq_theorem_undecided += o.licq_theorem_undecided;
        self.mfcq_r_theorem_holds += o.mfcq_r_theorem_holds;
        self.mfcq_r_theorem_undecided += o.mfcq_r_theorem_undecided;
        self.flagged_points += o.flagged_points;
        self.strict_complementarity_points += o.strict_complementarity_points;
        self.kkt_equivalence_checks += o.kkt_equivalence_checks;
        for (k, v) in o.verdict_counts {
            let e = self.verdict_counts.entry(k).or_default();
            (0..3).for_each(|i| e[i] += v[i]);
        }
        self.violations.extend(o.violations);
    }
}

/// A small affine MPEC with a feasible point and an objective gradient.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineCase {
    pub mpec: AffineMpec,
    pub point: Vec<f64>,
    pub grad_f: Vec<f64>,
}

fn int_row(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-2..=2) as f64).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Integer gradients in `[-2, 2]`, an integer point, and offsets chosen so
/// that each constraint has a prescribed activity at that point. The
/// objective gradient is either random or minus a random multiplier
/// combination of active gradients, so every stationarity class occurs.
pub fn random_affine_case(rng: &mut ChaCha8Rng) -> AffineCase {
    let n = rng.random_range(1..=5);
    let m = rng.random_range(0..=3);
    let p = rng.random_range(0..=2);
    let l = rng.random_range(1..=3);
    let point: Vec<f64> = (0..n).map(|_| rng.random_range(-1..=1) as f64).collect();
    let map = |count: usize, targets: &mut dyn FnMut(&mut ChaCha8Rng) -> f64, rng: &mut ChaCha8Rng| {
        let matrix: Vec<Vec<f64>> = (0..count).map(|_| int_row(rng, n)).collect();
        let offset = matrix.iter().map(|row| targets(rng) - dot(row, &point)).collect();
        AffineMap { matrix, offset }
    };
    let g = map(m, &mut |r| if r.random_bool(0.6) { 0.0 } else { -(r.random_range(1..=2) as f64) }, rng);
    let h = map(p, &mut |_| 0.0, rng);
    let kinds: Vec<u8> = (0..l).map(|_| rng.random_range(0..3)).collect();
    let pos = |r: &mut ChaCha8Rng| r.random_range(1..=2) as f64;
    let mut k = 0;
    let comp_g = map(
        l,
        &mut |r| {
            let v = if kinds[k] == 1 { pos(r) } else { 0.0 };
            k += 1;
            v
        },
        rng,
    );
    let mut k = 0;
    let comp_h = map(
        l,
        &mut |r| {
            let v = if kinds[k] == 0 { pos(r) } else { 0.0 };
            k += 1;
            v
        },
        rng,
    );
    let mpec = AffineMpec { n, g, h, comp_g, comp_h };

    let grad_f = if rng.random_bool(0.3) {
        int_row(rng, n)
    } else {
        let mut acc = vec![0.0; n];
        let mut add = |coef: f64, row: &[f64]| acc.iter_mut().zip(row).for_each(|(a, x)| *a -= coef * x);
        let vals = mpec.g.apply(&point);
        for (row, v) in mpec.g.matrix.iter().zip(vals) {
            if v == 0.0 {
                add(rng.random_range(0..=2) as f64, row);
            }
        }
        for row in &mpec.h.matrix {
            add(rng.random_range(-2..=2) as f64, row);
        }
        for (i, kind) in kinds.iter().enumerate() {
            let (gam, nu) = match kind {
                0 => (rng.random_range(-2..=2) as f64, 0.0),
                1 => (0.0, rng.random_range(-2..=2) as f64),
                _ => (rng.random_range(-1..=2) as f64, rng.random_range(-1..=2) as f64),
            };
            add(-gam, &mpec.comp_g.matrix[i]);
            add(-nu, &mpec.comp_h.matrix[i]);
        }
        acc
    };
    AffineCase { mpec, point, grad_f }
}

/// A random instance: Gaussian features, labels from a random linear rule
/// with optional label noise, split into folds from the generator's stream.
pub fn random_bho_instance(rng: &mut ChaCha8Rng) -> Result<BhoInstance> {
    let folds = rng.random_range(1..=3);
    let m1 = rng.random_range(1..=5);
    let m2 = rng.random_range(1..=5);
    let p = rng.random_range(2..=5);
    let scale = rng.random_range(0.5..2.5);
    let noise = if rng.random_bool(0.5) { 0.0 } else { 0.25 };
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let teacher: Vec<f64> = (0..p).map(|_| normal.sample(rng)).collect();
    let count = folds * (m1 + m2);
    let mut features = Vec::with_capacity(count);
    let mut labels = Vec::with_capacity(count);
    for _ in 0..count {
        let x: Vec<f64> = (0..p).map(|_| scale * normal.sample(rng)).collect();
        let mut y = if dot(&x, &teacher) >= 0.0 { 1.0 } else { -1.0 };
        if rng.random_bool(noise) {
            y = -y;
        }
        features.push(x);
        labels.push(y);
    }
    let ds = Dataset::new(features, labels)?;
    let split = FoldSplit::new(count, folds, m1, m2, rng.random())?;
    BhoInstance::from_dataset(&ds, &split)
}

/// Lower-level solve plus completion to a feasible point.
pub fn generated_point(inst: &BhoInstance, c: f64, tol: &Tolerances) -> Result<BhoPoint> {
    let alpha = solve_lower_level(inst, c, &QpOptions::default())?;
    Ok(assemble_feasible_point(inst, c, &alpha, tol)?.point)
}

fn duals_optimal(inst: &BhoInstance, point: &BhoPoint) -> bool {
    (0..inst.folds()).all(|t| {
        let m2 = inst.m2();
        natural_residual(&inst.fold_gram(t), point.c, &point.alpha[t * m2..(t + 1) * m2]) <= 1e-8
    })
}

/// Rescales `count` training samples with zero dual and slack margin so that
/// their margin becomes exactly one. The duals stay optimal because the
/// rescaled samples carry no weight.
fn force_lambda1(
    inst: &BhoInstance,
    point: &BhoPoint,
    count: usize,
    rng: &mut ChaCha8Rng,
    tol: &Tolerances,
) -> Result<Option<(BhoInstance, BhoPoint)>> {
    let pat = classify_lambda_psi(inst, point, tol)?;
    let mut pool = pat.lambda2.clone();
    if pool.len() < count {
        return Ok(None);
    }
    pool.shuffle(rng);
    let k_alpha = inst.bbt() * nalgebra::DVector::from_column_slice(&point.alpha);
    let mut forced = inst.clone();
    for &j in &pool[..count] {
        forced.scale_training_row(j, 1.0 / k_alpha[j])?;
    }
    let p = assemble_feasible_point(&forced, point.c, &point.alpha, tol)?.point;
    Ok(duals_optimal(&forced, &p).then_some((forced, p)))
}

/// Solves at a large `C`, then lowers `C` to the largest dual so that one
/// sample sits exactly at the bound with zero slack.
fn force_lambda3c(inst: &BhoInstance, tol: &Tolerances) -> Result<Option<(BhoInstance, BhoPoint)>> {
    let big = 1e3;
    let alpha = solve_lower_level(inst, big, &QpOptions::default())?;
    let top = alpha.iter().copied().fold(0.0, f64::max);
    if top >= big - 1e-6 || top <= 10.0 * tol.activity_eps {
        return Ok(None);
    }
    let p = assemble_feasible_point(inst, top, &alpha, tol)?.point;
    Ok(duals_optimal(inst, &p).then_some((inst.clone(), p)))
}

pub fn forced_point(
    inst: &BhoInstance,
    kind: ForcedKind,
    rng: &mut ChaCha8Rng,
    tol: &Tolerances,
) -> Result<Option<(BhoInstance, BhoPoint)>> {
    match kind {
        ForcedKind::Lambda1 => {
            let c = [0.05, 0.1, 0.3, 1.0][rng.random_range(0..4)];
            force_lambda1(inst, &generated_point(inst, c, tol)?, 1, rng, tol)
        }
        ForcedKind::Lambda1LargeC => force_lambda1(inst, &generated_point(inst, 1e3, tol)?, 1, rng, tol),
        ForcedKind::TwoLambda1 => force_lambda1(inst, &generated_point(inst, 1.0, tol)?, 2, rng, tol),
        ForcedKind::Lambda3c => force_lambda3c(inst, tol),
        ForcedKind::Lambda1AndLambda3c => match force_lambda3c(inst, tol)? {
            Some((i, p)) => force_lambda1(&i, &p, 1, rng, tol),
            None => Ok(None),
        },
        ForcedKind::DuplicateRows => {
            if inst.m2() < 2 {
                return Ok(None);
            }
            let mut dup = inst.clone();
            let t = rng.random_range(0..inst.folds());
            dup.duplicate_training_row(t * inst.m2(), t * inst.m2() + 1)?;
            let c = [0.1, 1.0, 10.0][rng.random_range(0..3)];
            let p = generated_point(&dup, c, tol)?;
            Ok(Some((dup, p)))
        }
    }
}

struct Ctx<'a> {
    seed: u64,
    digest: String,
    cfg: &'a FuzzConfig,
    out: FuzzSummary,
}

impl Ctx<'_> {
    fn violation(&mut self, source: &str, check: &str, detail: String) {
        self.out.violations.push(FuzzViolation {
            seed: self.seed,
            instance_digest: self.digest.clone(),
            source: source.into(),
            check: check.into(),
            detail,
            reproduce: format!("mpec-cq fuzz --n 1 --seed {}", self.seed),
        });
    }

    fn count_verdicts(&mut self, report: &crate::cq::CqReport) {
        for v in &report.verdicts {
            let e = self.out.verdict_counts.entry(v.cq.to_string()).or_default();
            e[match v.verdict {
                Verdict::Holds => 0,
                Verdict::Fails => 1,
                Verdict::Undecided => 2,
            }] += 1;
        }
    }

    fn count_class(&mut self, class: StationarityClass) {
        *self
            .out
            .stationarity_classes
            .entry(serde_json::to_value(class).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default())
            .or_default() += 1;
    }

    fn affine(&mut self, case: &AffineCase) {
        let tol = self.cfg.tol;
        let run = || -> Result<_> {
            let eval = case.mpec.evaluate(&case.point)?;
            let feas = check_feasibility(&eval, &tol)?;
            if !feas.feasible {
                return Err(Error::InfeasibleConstruction {
                    family: "affine".into(),
                    index: 0,
                    residual: feas.max_violation,
                });
            }
            let pattern = classify_active(&eval, &tol)?;
            let report = check_all(&eval, &pattern, &tol, self.cfg.cap)?;
            let stat = classify_stationarity(&eval, &pattern, &case.grad_f, &tol, self.cfg.cap)?;
            let kkt = verify_kkt_equivalence(&eval, &pattern, &case.grad_f, &tol)?;
            Ok((pattern, report, stat, kkt))
        };
        let (pattern, report, stat, kkt) = match run() {
            Ok(r) => r,
            Err(e) => return self.violation("affine", "evaluation", e.to_string()),
        };
        self.out.affine_points += 1;
        self.out.kkt_equivalence_checks += 1;
        self.count_verdicts(&report);
        self.count_class(stat.strongest_class);
        for v in &report.implication_violations {
            self.violation("affine", "implication_lattice", v.detail.clone());
        }
        for v in &stat.monotonicity_violations {
            self.violation("affine", "stationarity_monotonicity", v.clone());
        }
        if !kkt {
            self.violation("affine", "kkt_equivalence", "strong stationarity and NLP KKT disagree".into());
        }
        if pattern.biactive.is_empty() {
            self.out.strict_complementarity_points += 1;
            let (t, r) = (report.verdict(crate::cq::CqName::MpecMfcqT), report.verdict(crate::cq::CqName::MpecMfcqR));
            if t != r {
                self.violation("affine", "mfcq_t_equals_mfcq_r", format!("MFCQ-T {t:?}, MFCQ-R {r:?}"));
            }
        }
    }

    fn bho(&mut self, inst: &BhoInstance, point: &BhoPoint, source: &str, forced: bool) {
        let a: BhoAnalysis = match analyze_bho_point(inst, point, &self.cfg.tol, self.cfg.cap) {
            Ok(a) => a,
            Err(e) => return self.violation(source, "analysis", e.to_string()),
        };
        self.out.bho_points += 1;
        self.count_verdicts(&a.cq);
        self.count_class(a.stationarity.strongest_class);
        if a.active.biactive.is_empty() {
            self.out.strict_complementarity_points += 1;
        }
        if !a.lambda_psi.flags.is_clean() {
            self.out.flagged_points += 1;
        }
        match a.mfcq_r_theorem.verdict {
            Verdict::Holds => self.out.mfcq_r_theorem_holds += 1,
            Verdict::Undecided => self.out.mfcq_r_theorem_undecided += 1,
            Verdict::Fails => {}
        }
        match a.licq_theorem.case {
            Some(case) => {
                let key = format!("{case:?}");
                *self.out.licq_cases_all.entry(key.clone()).or_default() += 1;
                if forced {
                    *self.out.licq_cases_forced.entry(key).or_default() += 1;
                }
            }
            None => self.out.licq_theorem_undecided += 1,
        }
        for m in a.mismatches() {
            self.violation(source, &m.check, format!("expected {}, observed {}", m.expected, m.observed));
        }
    }
}

fn run_iteration(cfg: &FuzzConfig, seed: u64) -> FuzzSummary {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ctx = Ctx { seed, digest: String::new(), cfg, out: FuzzSummary::default() };
    for _ in 0..cfg.affine_per_iteration {
        let case = random_affine_case(&mut rng);
        ctx.digest = digest(&case);
        ctx.affine(&case);
    }
    let inst = match random_bho_instance(&mut rng) {
        Ok(i) => i,
        Err(e) => {
            ctx.violation("bho", "instance", e.to_string());
            return ctx.out;
        }
    };
    ctx.digest = digest(&inst);
    let grid: Vec<f64> = {
        let mut g = cfg.c_grid.clone();
        g.shuffle(&mut rng);
        g.truncate(3);
        g
    };
    for c in grid {
        match generated_point(&inst, c, &cfg.tol) {
            Ok(p) => ctx.bho(&inst, &p, "bho", false),
            Err(e) => ctx.violation("bho", "point_generation", format!("C = {c}: {e}")),
        }
    }
    if cfg.forced {
        for kind in ForcedKind::ALL {
            ctx.out.forced_attempts += 1;
            let source = format!(
                "forced:{}",
                serde_json::to_value(kind).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default()
            );
            match forced_point(&inst, kind, &mut rng, &cfg.tol) {
                Ok(Some((fi, fp))) => {
                    ctx.out.forced_points += 1;
                    *ctx.out.forced_by_kind.entry(source.trim_start_matches("forced:").to_string()).or_default() += 1;
                    let saved = std::mem::replace(&mut ctx.digest, digest(&fi));
                    ctx.bho(&fi, &fp, &source, true);
                    ctx.digest = saved;
                }
                Ok(None) => {}
                Err(e) => ctx.violation(&source, "point_generation", e.to_string()),
            }
        }
    }
    ctx.out
}

/// Runs `cfg.iterations` independent iterations in parallel and merges them
/// in seed order.
pub fn run_fuzz(cfg: &FuzzConfig) -> FuzzSummary {
    let parts: Vec<FuzzSummary> =
        (0..cfg.iterations as u64).into_par_iter().map(|i| run_iteration(cfg, cfg.seed.wrapping_add(i))).collect();
    let mut summary = FuzzSummary { seed: cfg.seed, iterations: cfg.iterations, ..Default::default() };
    for p in parts {
        summary.absorb(p);
    }
    summary
}
