//! Multiplier-based stationarity classes for MPECs.
//!
//! All four classes share the multiplier system
//!
//! ```text
//!   grad f + sum lambda_i grad g_i + sum mu_i grad h_i - sum gamma_i grad G_i - sum nu_i grad H_i = 0
//! ```
//!
//! with `lambda >= 0` supported on `I_g`, `gamma = 0` on `I_H` and `nu = 0` on
//! `I_G`. They differ only in the sign rules on the biactive set:
//!
//! | class  | rule on each `i` in `I_GH`                                   |
//! |--------|--------------------------------------------------------------|
//! | weak   | none                                                         |
//! | C      | `gamma_i nu_i >= 0`                                          |
//! | M      | `gamma_i > 0, nu_i > 0` or `gamma_i nu_i = 0`                |
//! | strong | `gamma_i >= 0, nu_i >= 0`                                    |
//!
//! Each class is decided on its own LP (or branch family of LPs), and every
//! witness is re-checked against the sign rules and the residual without
//! reference to the LP that produced it.

use serde::{Deserialize, Serialize};

use crate::cq::Verdict;
use crate::error::Result;
use crate::kernels::{LinearProgram, LpOutcome, Relation};
use crate::model::{ActivePattern, PointEvaluation, RowFamily, Tolerances};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StationarityClass {
    NotStationary,
    Weak,
    C,
    M,
    Strong,
}

impl StationarityClass {
    pub const CLASSES: [StationarityClass; 4] =
        [StationarityClass::Weak, StationarityClass::C, StationarityClass::M, StationarityClass::Strong];
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiplierVector {
    pub lambda: Vec<f64>,
    pub mu: Vec<f64>,
    pub gamma: Vec<f64>,
    pub nu: Vec<f64>,
}

impl MultiplierVector {
    pub fn zeros(eval: &PointEvaluation) -> Self {
        let d = eval.dims;
        Self { lambda: vec![0.0; d.m], mu: vec![0.0; d.p], gamma: vec![0.0; d.l], nu: vec![0.0; d.l] }
    }

    /// `||grad f + sum lambda grad g + sum mu grad h - sum gamma grad G - sum nu grad H||_inf`.
    pub fn residual(&self, eval: &PointEvaluation, grad_f: &[f64]) -> f64 {
        let mut r = grad_f.to_vec();
        let mut acc = |coef: f64, row: &[f64]| {
            if coef != 0.0 {
                r.iter_mut().zip(row).for_each(|(a, x)| *a += coef * x);
            }
        };
        for (c, row) in self.lambda.iter().zip(&eval.g_grads) {
            acc(*c, row);
        }
        for (c, row) in self.mu.iter().zip(&eval.h_grads) {
            acc(*c, row);
        }
        for (c, row) in self.gamma.iter().zip(&eval.comp_g_grads) {
            acc(-*c, row);
        }
        for (c, row) in self.nu.iter().zip(&eval.comp_h_grads) {
            acc(-*c, row);
        }
        r.into_iter().map(f64::abs).fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassOutcome {
    pub class: StationarityClass,
    pub verdict: Verdict,
    pub witness: Option<MultiplierVector>,
    pub residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StationarityVerdict {
    /// Strongest class with a verified witness, ignoring undecided classes.
    pub strongest_class: StationarityClass,
    pub classes: Vec<ClassOutcome>,
    /// Violations of `strong => M => C => weak`, on verdicts or on witnesses.
    pub monotonicity_violations: Vec<String>,
}

impl StationarityVerdict {
    pub fn outcome(&self, class: StationarityClass) -> Option<&ClassOutcome> {
        self.classes.iter().find(|c| c.class == class)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Sign {
    Free,
    Nonneg,
    Nonpos,
    /// `>= t` for the shared margin variable `t`.
    AtLeastT,
}

/// Rule for the pair `(gamma_i, nu_i)` at a biactive index.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum PairRule {
    Free,
    BothNonneg,
    BothNonpos,
    BothPositive,
    GammaZero,
    NuZero,
}

struct Slot {
    family: RowFamily,
    index: usize,
    sign: Sign,
}

fn slot_sign_coef(family: RowFamily) -> f64 {
    match family {
        RowFamily::Ineq | RowFamily::Eq => 1.0,
        RowFamily::CompG | RowFamily::CompH => -1.0,
    }
}

/// Solves the multiplier system with the given biactive rules. When some
/// slot is `AtLeastT`, the common lower bound `t <= 1` is maximized and the
/// branch counts only if `t` reaches `min_margin`.
fn solve_system(
    eval: &PointEvaluation,
    pattern: &ActivePattern,
    grad_f: &[f64],
    rules: &[(usize, PairRule)],
    maximize_margin: bool,
    min_margin: f64,
) -> Result<Option<MultiplierVector>> {
    let mut slots = Vec::new();
    let mut push = |family, index, sign| slots.push(Slot { family, index, sign });
    for &i in &pattern.ineq {
        push(RowFamily::Ineq, i, Sign::Nonneg);
    }
    for i in 0..eval.dims.p {
        push(RowFamily::Eq, i, Sign::Free);
    }
    for &i in &pattern.g_only {
        push(RowFamily::CompG, i, Sign::Free);
    }
    for &i in &pattern.h_only {
        push(RowFamily::CompH, i, Sign::Free);
    }
    for &(i, rule) in rules {
        let (sg, sh) = match rule {
            PairRule::Free => (Some(Sign::Free), Some(Sign::Free)),
            PairRule::BothNonneg => (Some(Sign::Nonneg), Some(Sign::Nonneg)),
            PairRule::BothNonpos => (Some(Sign::Nonpos), Some(Sign::Nonpos)),
            PairRule::BothPositive => (Some(Sign::AtLeastT), Some(Sign::AtLeastT)),
            PairRule::GammaZero => (None, Some(Sign::Free)),
            PairRule::NuZero => (Some(Sign::Free), None),
        };
        if let Some(s) = sg {
            push(RowFamily::CompG, i, s);
        }
        if let Some(s) = sh {
            push(RowFamily::CompH, i, s);
        }
    }

    let n = eval.dims.n;
    let f_scale = grad_f.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let rhs_scale = if f_scale > 0.0 { f_scale } else { 1.0 };
    let row_scale: Vec<f64> = slots
        .iter()
        .map(|s| {
            let nrm = eval.grad(s.family, s.index).iter().map(|x| x * x).sum::<f64>().sqrt();
            if nrm > 0.0 {
                nrm
            } else {
                1.0
            }
        })
        .collect();

    let has_t = slots.iter().any(|s| s.sign == Sign::AtLeastT);
    let t = slots.len();
    let mut lp = LinearProgram::new(slots.len() + usize::from(has_t));
    for (j, s) in slots.iter().enumerate() {
        if s.sign == Sign::Free {
            lp.set_free(j);
        }
    }
    for (c, gc) in grad_f.iter().enumerate().take(n) {
        let mut row = vec![0.0; lp.num_vars()];
        for (j, s) in slots.iter().enumerate() {
            let sign = if s.sign == Sign::Nonpos { -1.0 } else { 1.0 };
            row[j] = sign * slot_sign_coef(s.family) * eval.grad(s.family, s.index)[c] / row_scale[j];
        }
        lp.add(row, Relation::Eq, -gc / rhs_scale);
    }
    if has_t {
        for (j, s) in slots.iter().enumerate() {
            if s.sign == Sign::AtLeastT {
                lp.add_sparse(&[(j, 1.0), (t, -1.0)], Relation::Ge, 0.0);
            }
        }
        lp.add_sparse(&[(t, 1.0)], Relation::Le, 1.0);
        if maximize_margin {
            lp.set_objective(t, 1.0);
        }
    }
    let x = match lp.solve()? {
        LpOutcome::Optimal { x, .. } => x,
        LpOutcome::Infeasible => return Ok(None),
        // Only reachable without a margin objective; any feasible point will do.
        LpOutcome::Unbounded => return Ok(None),
    };
    if has_t && maximize_margin && x[t] < min_margin {
        return Ok(None);
    }

    let mut mv = MultiplierVector::zeros(eval);
    for (j, s) in slots.iter().enumerate() {
        let mut v = x[j] * rhs_scale / row_scale[j];
        match s.sign {
            Sign::Nonneg | Sign::AtLeastT => v = v.max(0.0),
            Sign::Nonpos => v = -v.max(0.0),
            Sign::Free => {}
        }
        let target = match s.family {
            RowFamily::Ineq => &mut mv.lambda,
            RowFamily::Eq => &mut mv.mu,
            RowFamily::CompG => &mut mv.gamma,
            RowFamily::CompH => &mut mv.nu,
        };
        target[s.index] = v;
    }
    Ok(Some(mv))
}

fn residual_bound(grad_f: &[f64], tol: &Tolerances) -> f64 {
    tol.witness_slack * grad_f.iter().fold(1.0f64, |a, x| a.max(x.abs()))
}

/// Checks a multiplier vector against the sign rules of `class` and the
/// stationarity residual. Returns the residual on success.
pub fn verify_multipliers(
    eval: &PointEvaluation,
    pattern: &ActivePattern,
    grad_f: &[f64],
    mv: &MultiplierVector,
    class: StationarityClass,
    tol: &Tolerances,
) -> std::result::Result<f64, String> {
    let d = eval.dims;
    if mv.lambda.len() != d.m || mv.mu.len() != d.p || mv.gamma.len() != d.l || mv.nu.len() != d.l {
        return Err("multiplier lengths do not match dimensions".into());
    }
    let zero = |x: f64| x.abs() <= tol.feas_eps;
    for (i, &l) in mv.lambda.iter().enumerate() {
        if l < -tol.feas_eps || (!pattern.ineq.contains(&i) && !zero(l)) {
            return Err(format!("lambda[{i}] = {l} violates sign or support"));
        }
    }
    for &i in &pattern.h_only {
        if !zero(mv.gamma[i]) {
            return Err(format!("gamma[{i}] must vanish on I_H"));
        }
    }
    for &i in &pattern.g_only {
        if !zero(mv.nu[i]) {
            return Err(format!("nu[{i}] must vanish on I_G"));
        }
    }
    let active: Vec<usize> = pattern.g_only.iter().chain(&pattern.h_only).chain(&pattern.biactive).copied().collect();
    for i in 0..d.l {
        if !active.contains(&i) && !(zero(mv.gamma[i]) && zero(mv.nu[i])) {
            return Err(format!("pair {i} is inactive but carries multipliers"));
        }
    }
    for &i in &pattern.biactive {
        let (g, h) = (mv.gamma[i], mv.nu[i]);
        let ok = match class {
            StationarityClass::NotStationary | StationarityClass::Weak => true,
            StationarityClass::C => g * h >= -tol.feas_eps * tol.feas_eps || zero(g) || zero(h),
            StationarityClass::M => (g > 0.0 && h > 0.0) || zero(g) || zero(h),
            StationarityClass::Strong => g >= -tol.feas_eps && h >= -tol.feas_eps,
        };
        if !ok {
            return Err(format!("biactive pair {i}: (gamma, nu) = ({g}, {h}) violates the {class:?} rule"));
        }
    }
    let residual = mv.residual(eval, grad_f);
    if residual > residual_bound(grad_f, tol) {
        return Err(format!("stationarity residual {residual:e} too large"));
    }
    Ok(residual)
}

/// Enumerates rule assignments over the biactive set, returning the first
/// branch whose system is solvable.
fn first_branch(
    eval: &PointEvaluation,
    pattern: &ActivePattern,
    grad_f: &[f64],
    choices: &[PairRule],
    margin: f64,
) -> Result<Option<MultiplierVector>> {
    let k = pattern.biactive.len();
    let base = choices.len();
    let total = base.pow(k as u32);
    for mut code in 0..total {
        let rules: Vec<(usize, PairRule)> = pattern
            .biactive
            .iter()
            .map(|&i| {
                let r = choices[code % base];
                code /= base;
                (i, r)
            })
            .collect();
        let needs_margin = rules.iter().any(|(_, r)| *r == PairRule::BothPositive);
        if let Some(mv) = solve_system(eval, pattern, grad_f, &rules, needs_margin, margin)? {
            return Ok(Some(mv));
        }
    }
    Ok(None)
}

fn outcome(
    class: StationarityClass,
    found: Option<MultiplierVector>,
    eval: &PointEvaluation,
    pattern: &ActivePattern,
    grad_f: &[f64],
    tol: &Tolerances,
) -> Result<ClassOutcome> {
    match found {
        None => Ok(ClassOutcome { class, verdict: Verdict::Fails, witness: None, residual: None, note: None }),
        Some(mv) => {
            let residual = verify_multipliers(eval, pattern, grad_f, &mv, class, tol)
                .map_err(|e| crate::error::Error::Lp(format!("{class:?} witness failed verification: {e}")))?;
            Ok(ClassOutcome { class, verdict: Verdict::Holds, witness: Some(mv), residual: Some(residual), note: None })
        }
    }
}

/// Decides each stationarity class independently and reports the strongest
/// one that holds. `cap` bounds `|I_GH|` for the branch enumerations of the
/// C and M classes; above it those classes are undecided.
pub fn classify_stationarity(
    eval: &PointEvaluation,
    pattern: &ActivePattern,
    grad_f: &[f64],
    tol: &Tolerances,
    cap: usize,
) -> Result<StationarityVerdict> {
    if grad_f.len() != eval.dims.n {
        return Err(crate::error::Error::Dimension(format!(
            "grad_f has length {}, expected {}",
            grad_f.len(),
            eval.dims.n
        )));
    }
    if grad_f.iter().any(|x| !x.is_finite()) {
        return Err(crate::error::Error::NonFinite("grad_f".into()));
    }
    let k = pattern.biactive.len();
    let mut classes = Vec::with_capacity(4);

    if grad_f.iter().all(|&x| x == 0.0) {
        let mv = MultiplierVector::zeros(eval);
        for class in StationarityClass::CLASSES {
            classes.push(outcome(class, Some(mv.clone()), eval, pattern, grad_f, tol)?);
        }
    } else {
        let free: Vec<_> = pattern.biactive.iter().map(|&i| (i, PairRule::Free)).collect();
        let weak = solve_system(eval, pattern, grad_f, &free, false, 0.0)?;
        classes.push(outcome(StationarityClass::Weak, weak, eval, pattern, grad_f, tol)?);

        for (class, choices) in [
            (StationarityClass::C, &[PairRule::BothNonneg, PairRule::BothNonpos][..]),
            (StationarityClass::M, &[PairRule::BothPositive, PairRule::GammaZero, PairRule::NuZero][..]),
        ] {
            if k > cap {
                classes.push(ClassOutcome {
                    class,
                    verdict: Verdict::Undecided,
                    witness: None,
                    residual: None,
                    note: Some(format!("|I_GH| = {k} exceeds enumeration cap {cap}")),
                });
            } else {
                let found = first_branch(eval, pattern, grad_f, choices, tol.strict_margin_eps)?;
                classes.push(outcome(class, found, eval, pattern, grad_f, tol)?);
            }
        }

        // The margin objective spreads weight onto the biactive multipliers;
        // feasibility is all that matters, so no minimum is imposed.
        let pos: Vec<_> = pattern.biactive.iter().map(|&i| (i, PairRule::BothPositive)).collect();
        let strong = solve_system(eval, pattern, grad_f, &pos, true, f64::NEG_INFINITY)?;
        classes.push(outcome(StationarityClass::Strong, strong, eval, pattern, grad_f, tol)?);
    }

    let monotonicity_violations = audit_monotonicity(&classes, eval, pattern, grad_f, tol);
    let strongest_class = classes
        .iter()
        .filter(|c| c.verdict == Verdict::Holds)
        .map(|c| c.class)
        .max()
        .unwrap_or(StationarityClass::NotStationary);
    Ok(StationarityVerdict { strongest_class, classes, monotonicity_violations })
}

fn audit_monotonicity(
    classes: &[ClassOutcome],
    eval: &PointEvaluation,
    pattern: &ActivePattern,
    grad_f: &[f64],
    tol: &Tolerances,
) -> Vec<String> {
    let mut out = Vec::new();
    for strong in classes {
        let Some(w) = &strong.witness else { continue };
        for weaker in classes.iter().filter(|c| c.class < strong.class) {
            if weaker.verdict == Verdict::Fails {
                out.push(format!("{:?} holds but {:?} fails", strong.class, weaker.class));
            }
            if let Err(e) = verify_multipliers(eval, pattern, grad_f, w, weaker.class, tol) {
                out.push(format!("{:?} witness is not a {:?} witness: {e}", strong.class, weaker.class));
            }
        }
    }
    out
}

/// Self-test: the strong-stationarity system is solvable exactly when the
/// KKT system of the plain nonlinear program (with `G_i H_i = 0` as equality
/// constraints) is.
pub fn verify_kkt_equivalence(
    eval: &PointEvaluation,
    pattern: &ActivePattern,
    grad_f: &[f64],
    tol: &Tolerances,
) -> Result<bool> {
    let pos: Vec<_> = pattern.biactive.iter().map(|&i| (i, PairRule::BothNonneg)).collect();
    let strong = solve_system(eval, pattern, grad_f, &pos, false, 0.0)?.is_some();
    Ok(strong == nlp_kkt_feasible(eval, grad_f, tol)?)
}

/// `grad f + sum lambda grad g + sum mu grad h - sum a grad G - sum b grad H
/// + sum c grad(G o H) = 0`, with `lambda, a, b >= 0` on active constraints
/// and `c` free.
fn nlp_kkt_feasible(eval: &PointEvaluation, grad_f: &[f64], tol: &Tolerances) -> Result<bool> {
    let n = eval.dims.n;
    let eps = tol.activity_eps;
    let mut cols: Vec<(Vec<f64>, bool)> = Vec::new();
    for (v, row) in eval.g_vals.iter().zip(&eval.g_grads) {
        if v.abs() <= eps {
            cols.push((row.clone(), false));
        }
    }
    for row in &eval.h_grads {
        cols.push((row.clone(), true));
    }
    for i in 0..eval.dims.l {
        let (gv, hv) = (eval.comp_g_vals[i], eval.comp_h_vals[i]);
        let (gg, hg) = (&eval.comp_g_grads[i], &eval.comp_h_grads[i]);
        if gv.abs() <= eps {
            cols.push((gg.iter().map(|x| -x).collect(), false));
        }
        if hv.abs() <= eps {
            cols.push((hg.iter().map(|x| -x).collect(), false));
        }
        if gv.abs() > eps || hv.abs() > eps {
            let prod: Vec<f64> = gg.iter().zip(hg).map(|(a, b)| hv * a + gv * b).collect();
            cols.push((prod, true));
        }
    }
    let mut lp = LinearProgram::new(cols.len());
    for (j, (_, free)) in cols.iter().enumerate() {
        if *free {
            lp.set_free(j);
        }
    }
    for c in 0..n {
        let row = cols.iter().map(|(g, _)| g[c]).collect();
        lp.add(row, Relation::Eq, -grad_f[c]);
    }
    Ok(!matches!(lp.solve()?, LpOutcome::Infeasible))
}
