use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::dense::from_rows;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankResult {
    pub rank: usize,
    /// Descending.
    pub singular_values: Vec<f64>,
    /// Row coefficients `y` with `y^T M ~ 0`, present whenever `rank < rows`.
    pub null_witness: Option<Vec<f64>>,
}

/// Numerical row rank of a dense matrix given as rows of length `cols`.
///
/// A singular value counts iff it exceeds `rel_tol * sigma_max * max(rows, cols)`.
/// When the rows are dependent, the left singular vector of the smallest
/// singular value is returned as a witness.
pub fn numerical_rank(rows: &[Vec<f64>], cols: usize, rel_tol: f64) -> RankResult {
    let r = rows.len();
    if r == 0 {
        return RankResult { rank: 0, singular_values: Vec::new(), null_witness: None };
    }
    if cols == 0 {
        let mut w = vec![0.0; r];
        w[0] = 1.0;
        return RankResult { rank: 0, singular_values: Vec::new(), null_witness: Some(w) };
    }
    // Pad with zero columns so that U is square and carries the left null space.
    let width = r.max(cols);
    let mut m = DMatrix::<f64>::zeros(r, width);
    m.view_mut((0, 0), (r, cols)).copy_from(&from_rows(rows, cols));
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("U requested");
    let sv = svd.singular_values;

    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]));
    let sigma_max = sv[order[0]];
    let cutoff = rel_tol * sigma_max * width as f64;
    let rank = if sigma_max == 0.0 { 0 } else { sv.iter().filter(|&&s| s > cutoff).count() };

    let genuine = r.min(cols);
    let singular_values: Vec<f64> = order.iter().take(genuine).map(|&i| sv[i]).collect();
    let null_witness = (rank < r).then(|| {
        let smallest = *order.last().unwrap();
        let from_svd: Vec<f64> = u.column(smallest).iter().copied().collect();
        // The SVD's left vectors can be loose on exactly singular input; the
        // Gram matrix eigenvector is a second candidate.
        let gram = &m * m.transpose();
        let eig = nalgebra::SymmetricEigen::new(gram);
        let k = eig.eigenvalues.iamin();
        let from_eig: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
        let resid = |w: &[f64]| combination_residual(rows, w, cols);
        if resid(&from_eig) < resid(&from_svd) {
            from_eig
        } else {
            from_svd
        }
    });
    RankResult { rank, singular_values, null_witness }
}

/// `max_j |sum_i y_i * rows[i][j]|`.
pub fn combination_residual(rows: &[Vec<f64>], coeffs: &[f64], cols: usize) -> f64 {
    let mut acc = vec![0.0; cols];
    for (row, &c) in rows.iter().zip(coeffs) {
        for (a, x) in acc.iter_mut().zip(row) {
            *a += c * x;
        }
    }
    acc.into_iter().map(f64::abs).fold(0.0, f64::max)
}
