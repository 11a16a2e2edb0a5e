//! Oracles that share no code with the library's own checks.

#![allow(dead_code)]

use mpec_cq::cq::{Certificate, CqVerdict};
use mpec_cq::model::{ActivePattern, PointEvaluation, RowFamily};
use mpec_cq::stationarity::{MultiplierVector, StationarityClass};

/// Exact rank of an integer matrix by fraction-free Gaussian elimination.
pub fn bareiss_rank(m: &[Vec<i64>]) -> usize {
    let mut a: Vec<Vec<i128>> = m.iter().map(|r| r.iter().map(|&x| x as i128).collect()).collect();
    let rows = a.len();
    let cols = a.first().map_or(0, Vec::len);
    let mut rank = 0;
    let mut prev = 1i128;
    for c in 0..cols {
        let Some(p) = (rank..rows).find(|&r| a[r][c] != 0) else { continue };
        a.swap(rank, p);
        for r in rank + 1..rows {
            for k in c + 1..cols {
                a[r][k] = (a[rank][c] * a[r][k] - a[r][c] * a[rank][k]) / prev;
            }
            a[r][c] = 0;
        }
        prev = a[rank][c];
        rank += 1;
        if rank == rows {
            break;
        }
    }
    rank
}

fn grad(eval: &PointEvaluation, family: RowFamily, index: usize) -> &[f64] {
    match family {
        RowFamily::Ineq => &eval.g_grads[index],
        RowFamily::Eq => &eval.h_grads[index],
        RowFamily::CompG => &eval.comp_g_grads[index],
        RowFamily::CompH => &eval.comp_h_grads[index],
    }
}

/// Re-derives the claim a certificate makes from the raw gradients.
/// Returns a description of the first problem found.
pub fn check_certificate(eval: &PointEvaluation, v: &CqVerdict, slack: f64) -> Result<(), String> {
    let n = eval.dims.n;
    let combine = |coeffs: &[f64], tags: &[mpec_cq::cq::RowTag]| -> f64 {
        let mut acc = vec![0.0; n];
        for (c, t) in coeffs.iter().zip(tags) {
            for (a, g) in acc.iter_mut().zip(grad(eval, t.family, t.index)) {
                *a += c * t.sign * g;
            }
        }
        acc.into_iter().map(f64::abs).fold(0.0, f64::max)
    };
    match &v.certificate {
        Some(Certificate::Combination { witness, rows, .. }) if witness.exists => {
            let y = witness.coefficients.as_ref().ok_or("witness without coefficients")?;
            if y.len() != rows.len() {
                return Err(format!("{}: {} coefficients for {} rows", v.cq, y.len(), rows.len()));
            }
            if y.iter().all(|&c| c == 0.0) {
                return Err(format!("{}: zero witness", v.cq));
            }
            if y.iter().zip(rows).any(|(&c, t)| t.family == RowFamily::Ineq && c < 0.0) {
                return Err(format!("{}: negative inequality multiplier", v.cq));
            }
            let r = combine(y, rows);
            if r > slack {
                return Err(format!("{}: witness residual {r:e}", v.cq));
            }
        }
        Some(Certificate::Rank { rank, rows }) => {
            if let Some(w) = &rank.null_witness {
                let norm: f64 = w.iter().map(|x| x * x).sum::<f64>().sqrt();
                let r = combine(w, rows);
                if (norm - 1.0).abs() > 1e-6 || r > slack {
                    return Err(format!("{}: null vector norm {norm}, residual {r:e}", v.cq));
                }
            }
        }
        _ => {}
    }
    Ok(())
}

/// Checks a stationarity multiplier vector against the sign rules of its
/// class, with everything recomputed here.
pub fn check_stationarity_witness(
    eval: &PointEvaluation,
    active: &ActivePattern,
    grad_f: &[f64],
    class: StationarityClass,
    w: &MultiplierVector,
    slack: f64,
) -> Result<f64, String> {
    let mut r = grad_f.to_vec();
    let mut add = |c: f64, row: &[f64]| r.iter_mut().zip(row).for_each(|(a, x)| *a += c * x);
    for (i, &c) in w.lambda.iter().enumerate() {
        add(c, &eval.g_grads[i]);
    }
    for (i, &c) in w.mu.iter().enumerate() {
        add(c, &eval.h_grads[i]);
    }
    for (i, &c) in w.gamma.iter().enumerate() {
        add(-c, &eval.comp_g_grads[i]);
    }
    for (i, &c) in w.nu.iter().enumerate() {
        add(-c, &eval.comp_h_grads[i]);
    }
    let residual = r.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let scale = grad_f.iter().map(|x| x.abs()).fold(1.0, f64::max);
    if residual > slack * scale {
        return Err(format!("{class:?}: residual {residual:e}"));
    }
    for (i, &l) in w.lambda.iter().enumerate() {
        if l < 0.0 || (l != 0.0 && !active.ineq.contains(&i)) {
            return Err(format!("{class:?}: lambda[{i}] = {l}"));
        }
    }
    for i in 0..eval.dims.l {
        let (g, h) = (w.gamma[i], w.nu[i]);
        if active.h_only.contains(&i) && g != 0.0 {
            return Err(format!("{class:?}: gamma[{i}] = {g} on an inactive G"));
        }
        if active.g_only.contains(&i) && h != 0.0 {
            return Err(format!("{class:?}: nu[{i}] = {h} on an inactive H"));
        }
        if active.biactive.contains(&i) {
            let ok = match class {
                StationarityClass::Strong => g >= 0.0 && h >= 0.0,
                StationarityClass::M => (g > 0.0 && h > 0.0) || g * h == 0.0,
                StationarityClass::C => g * h >= 0.0,
                _ => true,
            };
            if !ok {
                return Err(format!("{class:?}: biactive {i} has gamma = {g}, nu = {h}"));
            }
        }
    }
    Ok(residual)
}
