//! Lower-level training problem: the SVC dual
//!
//! ```text
//!   min 1/2 alpha^T K alpha - 1^T alpha   s.t.  0 <= alpha <= C
//! ```
//!
//! solved fold by fold with accelerated projected gradient at step `1/L`.
//! Every 100 iterations the current free set is used for a direct solve of
//! the reduced stationarity system; if the clipped result is optimal to the
//! requested tolerance it replaces the iterate and the solve stops.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::instance::BhoInstance;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QpOptions {
    pub max_iter: usize,
    /// Bound on the natural residual `||alpha - proj(alpha - grad)||_inf`.
    pub tol: f64,
    /// Projected-gradient iterations between direct free-set solves.
    pub polish_every: usize,
}

impl Default for QpOptions {
    fn default() -> Self {
        Self { max_iter: 100_000, tol: 1e-9, polish_every: 100 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QpSolution {
    pub alpha: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

fn project(x: f64, c: f64) -> f64 {
    x.clamp(0.0, c)
}

fn gradient(k: &DMatrix<f64>, alpha: &DVector<f64>) -> DVector<f64> {
    k * alpha - DVector::from_element(alpha.len(), 1.0)
}

/// `||alpha - proj(alpha - (K alpha - 1))||_inf`, zero exactly at the optimum.
pub fn natural_residual(k: &DMatrix<f64>, c: f64, alpha: &[f64]) -> f64 {
    let a = DVector::from_column_slice(alpha);
    let g = gradient(k, &a);
    a.iter().zip(g.iter()).map(|(&ai, &gi)| (ai - project(ai - gi, c)).abs()).fold(0.0, f64::max)
}

/// Largest eigenvalue of a symmetric PSD matrix by power iteration, padded
/// by 1% and capped by the Gershgorin bound.
fn lipschitz(k: &DMatrix<f64>) -> f64 {
    let n = k.nrows();
    let mut v = DVector::from_fn(n, |i, _| 1.0 + 0.1 * i as f64);
    v /= v.norm();
    let mut lambda = 0.0;
    for _ in 0..1000 {
        let w = k * &v;
        let nrm = w.norm();
        if nrm == 0.0 {
            return 0.0;
        }
        let next = v.dot(&w);
        v = w / nrm;
        let done = (next - lambda).abs() <= 1e-10 * next.abs();
        lambda = next;
        if done {
            break;
        }
    }
    let gersh = k.row_iter().map(|r| r.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max);
    (1.01 * lambda).min(gersh)
}

/// Free/upper split of a candidate: an index sits at a bound when it is
/// within `near` of it and the gradient pushes it there.
fn partition(g: &DVector<f64>, alpha: &DVector<f64>, c: f64, near: f64) -> (Vec<usize>, Vec<usize>) {
    let mut at_upper = Vec::new();
    let mut free = Vec::new();
    for i in 0..alpha.len() {
        if alpha[i] <= near && g[i] >= 0.0 {
            continue;
        }
        if alpha[i] >= c - near && g[i] <= 0.0 {
            at_upper.push(i);
        } else {
            free.push(i);
        }
    }
    (free, at_upper)
}

/// Direct solve of the reduced stationarity system on a guessed free set,
/// refined a few times from its own clipped output. `None` when no guess
/// reaches `tol`.
fn polish(k: &DMatrix<f64>, c: f64, alpha: &DVector<f64>, tol: f64) -> Option<DVector<f64>> {
    let n = alpha.len();
    let near = 1e-6 * c.max(1.0);
    let mut current = alpha.clone();
    for _ in 0..5 {
        let (free, at_upper) = partition(&gradient(k, &current), &current, c, near);
        let mut cand = DVector::zeros(n);
        for &i in &at_upper {
            cand[i] = c;
        }
        if !free.is_empty() {
            let kff = DMatrix::from_fn(free.len(), free.len(), |r, s| k[(free[r], free[s])]);
            let rhs =
                DVector::from_fn(free.len(), |r, _| 1.0 - at_upper.iter().map(|&u| k[(free[r], u)] * c).sum::<f64>());
            let sol = kff.svd(true, true).solve(&rhs, 1e-12).ok()?;
            for (r, &i) in free.iter().enumerate() {
                cand[i] = project(sol[r], c);
            }
        }
        if natural_residual(k, c, cand.as_slice()) <= tol {
            return Some(cand);
        }
        if cand == current {
            break;
        }
        current = cand;
    }
    None
}

/// Newton corrections on the strictly interior entries, so that their
/// gradient (and any product formed with it) is zero to working precision.
fn refine(k: &DMatrix<f64>, c: f64, alpha: &mut DVector<f64>) {
    let free: Vec<usize> = (0..alpha.len()).filter(|&i| alpha[i] > 0.0 && alpha[i] < c).collect();
    if free.is_empty() {
        return;
    }
    let kff = DMatrix::from_fn(free.len(), free.len(), |r, s| k[(free[r], free[s])]);
    let svd = kff.svd(true, true);
    let free_grad = |a: &DVector<f64>| {
        let g = gradient(k, a);
        (free.iter().map(|&i| g[i].abs()).fold(0.0, f64::max), g)
    };
    let (mut best, mut g) = free_grad(alpha);
    for _ in 0..3 {
        let rhs = DVector::from_fn(free.len(), |r, _| -g[free[r]]);
        let Ok(delta) = svd.solve(&rhs, 1e-12) else { return };
        let mut cand = alpha.clone();
        for (r, &i) in free.iter().enumerate() {
            cand[i] += delta[r];
        }
        if free.iter().any(|&i| cand[i] <= 0.0 || cand[i] >= c) {
            return;
        }
        let (res, cand_g) = free_grad(&cand);
        if res >= best || natural_residual(k, c, cand.as_slice()) > natural_residual(k, c, alpha.as_slice()) {
            return;
        }
        best = res;
        g = cand_g;
        *alpha = cand;
    }
}

/// Moves entries within `tol` of a bound onto it when the gradient agrees,
/// so that complementarity products built from the result vanish exactly.
fn snap(k: &DMatrix<f64>, c: f64, alpha: &mut DVector<f64>, tol: f64) {
    let g = gradient(k, alpha);
    for i in 0..alpha.len() {
        if alpha[i] <= tol && g[i] > 0.0 {
            alpha[i] = 0.0;
        } else if alpha[i] >= c - tol && g[i] < 0.0 {
            alpha[i] = c;
        }
    }
}

fn finish(k: &DMatrix<f64>, c: f64, mut alpha: DVector<f64>, iterations: usize, tol: f64) -> Option<QpSolution> {
    let before = alpha.clone();
    snap(k, c, &mut alpha, tol);
    if natural_residual(k, c, alpha.as_slice()) > tol {
        alpha = before;
    }
    refine(k, c, &mut alpha);
    let residual = natural_residual(k, c, alpha.as_slice());
    (residual <= tol).then(|| QpSolution { alpha: alpha.as_slice().to_vec(), iterations, residual })
}

/// Solves one box QP. `k` must be symmetric positive semidefinite.
///
/// Iterations are accelerated projected-gradient steps with a
/// gradient-based momentum restart.
pub fn solve_box_qp(k: &DMatrix<f64>, c: f64, opts: &QpOptions) -> Result<QpSolution> {
    let n = k.nrows();
    if k.ncols() != n {
        return Err(Error::Dimension("Gram matrix must be square".into()));
    }
    if !(c >= 0.0 && c.is_finite()) {
        return Err(Error::Parse(format!("C must be a nonnegative finite number, got {c}")));
    }
    if c == 0.0 || n == 0 {
        return Ok(QpSolution { alpha: vec![0.0; n], iterations: 0, residual: 0.0 });
    }
    let l = lipschitz(k);
    if l <= 1e-14 {
        // Zero Gram matrix: the linear term pushes every alpha to C.
        return Ok(QpSolution { alpha: vec![c; n], iterations: 0, residual: natural_residual(k, c, &vec![c; n]) });
    }
    let step = 1.0 / l;
    let mut alpha = DVector::zeros(n);
    let mut y = alpha.clone();
    let mut theta = 1.0f64;
    let mut it = 0;
    while it < opts.max_iter {
        let g = gradient(k, &y);
        let next = y.zip_map(&g, |yi, gi| project(yi - step * gi, c));
        // Restart when the step opposes the momentum direction.
        if (&y - &next).dot(&(&next - &alpha)) > 0.0 {
            theta = 1.0;
            y = alpha.clone();
            it += 1;
            continue;
        }
        let theta_next = 0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt());
        y = &next + (&next - &alpha) * ((theta - 1.0) / theta_next);
        alpha = next;
        theta = theta_next;
        it += 1;
        if it % opts.polish_every == 0 || it == opts.max_iter {
            if let Some(sol) = polish(k, c, &alpha, opts.tol).and_then(|p| finish(k, c, p, it, opts.tol)) {
                return Ok(sol);
            }
            if let Some(sol) = finish(k, c, alpha.clone(), it, opts.tol) {
                return Ok(sol);
            }
        }
    }
    Err(Error::NonConvergence { residual: natural_residual(k, c, alpha.as_slice()), iterations: it })
}

/// Solves every fold and concatenates the duals in training order.
pub fn solve_lower_level(inst: &BhoInstance, c: f64, opts: &QpOptions) -> Result<Vec<f64>> {
    let mut alpha = Vec::with_capacity(inst.n_train());
    for t in 0..inst.folds() {
        alpha.extend(solve_box_qp(&inst.fold_gram(t), c, opts)?.alpha);
    }
    Ok(alpha)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_box() {
        let k = DMatrix::from_row_slice(1, 1, &[4.0]);
        assert_eq!(solve_box_qp(&k, 0.0, &QpOptions::default()).unwrap().alpha, vec![0.0]);
    }

    #[test]
    fn one_dimensional_interior_minimizer() {
        let k = DMatrix::from_row_slice(1, 1, &[4.0]);
        let s = solve_box_qp(&k, 100.0, &QpOptions::default()).unwrap();
        assert!((s.alpha[0] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn upper_bound_active() {
        let k = DMatrix::from_row_slice(1, 1, &[4.0]);
        let s = solve_box_qp(&k, 0.1, &QpOptions::default()).unwrap();
        assert_eq!(s.alpha, vec![0.1]);
    }

    #[test]
    fn singular_gram_still_converges() {
        let k = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let s = solve_box_qp(&k, 10.0, &QpOptions::default()).unwrap();
        assert!(natural_residual(&k, 10.0, &s.alpha) <= 1e-9);
        assert!((s.alpha[0] + s.alpha[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn residual_oracle_on_generic_fold() {
        let b = DMatrix::from_row_slice(4, 2, &[1.0, 0.2, -0.3, 1.0, 0.5, 0.5, 2.0, -1.0]);
        let k = &b * b.transpose();
        let s = solve_box_qp(&k, 1.0, &QpOptions::default()).unwrap();
        assert!(natural_residual(&k, 1.0, &s.alpha) <= 1e-8);
    }

    #[test]
    fn zero_gram_goes_to_upper_bound() {
        let k = DMatrix::zeros(3, 3);
        assert_eq!(solve_box_qp(&k, 2.0, &QpOptions::default()).unwrap().alpha, vec![2.0; 3]);
    }
}
