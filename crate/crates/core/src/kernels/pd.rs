use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// True iff the smallest eigenvalue of the (symmetrised) matrix exceeds
/// `pd_eps * (1 + trace / rows)`. The empty matrix is positive definite.
pub fn is_positive_definite(m: &DMatrix<f64>, pd_eps: f64) -> Result<bool> {
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension(format!("expected a square matrix, got {}x{}", m.nrows(), m.ncols())));
    }
    let k = m.nrows();
    if k == 0 {
        return Ok(true);
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("matrix passed to positive-definiteness test".into()));
    }
    let scale = 1.0 + m.amax();
    let asym = (m - m.transpose()).amax();
    if asym > 1e-9 * scale {
        return Err(Error::Dimension(format!("matrix is not symmetric (max asymmetry {asym:e})")));
    }
    let sym = (m + m.transpose()) * 0.5;
    let min_eig = sym.clone().symmetric_eigen().eigenvalues.min();
    let threshold = pd_eps * (1.0 + sym.trace() / k as f64);
    Ok(min_eig > threshold)
}

/// Solves `m x = rhs` for a positive definite `m`, falling back to LU when
/// Cholesky rejects a matrix that passed the eigenvalue test by a hair.
pub fn solve_spd(m: &DMatrix<f64>, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if let Some(ch) = m.clone().cholesky() {
        return Ok(ch.solve(rhs));
    }
    m.clone().lu().solve(rhs).ok_or_else(|| Error::Dimension("singular matrix in positive definite solve".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_positive() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 3.0]);
        assert!(is_positive_definite(&m, 1e-10).unwrap());
    }

    #[test]
    fn rank_one_is_not_pd() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(!is_positive_definite(&m, 1e-10).unwrap());
    }

    #[test]
    fn gram_of_repeated_vector_is_singular() {
        let b = DMatrix::from_row_slice(2, 3, &[0.5, -1.0, 2.0, 0.5, -1.0, 2.0]);
        let gram = &b * b.transpose();
        assert!(!is_positive_definite(&gram, 1e-10).unwrap());
    }

    #[test]
    fn non_square_rejected() {
        let m = DMatrix::<f64>::zeros(2, 3);
        assert!(matches!(is_positive_definite(&m, 1e-10), Err(Error::Dimension(_))));
    }

    #[test]
    fn asymmetric_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(is_positive_definite(&m, 1e-10).is_err());
    }

    #[test]
    fn empty_is_pd() {
        assert!(is_positive_definite(&DMatrix::<f64>::zeros(0, 0), 1e-10).unwrap());
    }
}
