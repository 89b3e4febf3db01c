use super::matrix::Matrix;
use crate::error::{Error, Result};

const SYMMETRY_RTOL: f64 = 1e-10;

/// Lower-triangular Cholesky factor `L` with `L·Lᵀ = A`.
///
/// Fails with `NotPositiveDefinite` when a pivot is not strictly positive,
/// which for covariance estimates means the matrix needs more regularization.
pub fn cholesky(a: &Matrix) -> Result<Matrix> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: a.cols(),
        });
    }
    let scale = a.as_slice().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for r in 0..n {
        for c in 0..r {
            if (a[(r, c)] - a[(c, r)]).abs() > SYMMETRY_RTOL * scale.max(f64::MIN_POSITIVE) {
                return Err(Error::NotSymmetric { row: r, col: c });
            }
        }
    }

    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut pivot = a[(j, j)];
        for k in 0..j {
            pivot -= l[(j, k)] * l[(j, k)];
        }
        if !(pivot > 0.0) {
            return Err(Error::NotPositiveDefinite { index: j, pivot });
        }
        let diag = pivot.sqrt();
        l[(j, j)] = diag;
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / diag;
        }
    }
    Ok(l)
}

/// `log det A` from the Cholesky factor of `A`.
pub fn log_det_cholesky(l: &Matrix) -> f64 {
    2.0 * (0..l.rows()).map(|i| l[(i, i)].ln()).sum::<f64>()
}

/// Solves `L·y = b` by forward substitution.
pub fn solve_lower(l: &Matrix, b: &[f64]) -> Vec<f64> {
    let n = l.rows();
    debug_assert_eq!(b.len(), n);
    let mut y = vec![0.0; n];
    for i in 0..n {
        let row = l.row(i);
        let s: f64 = row[..i].iter().zip(&y[..i]).map(|(a, b)| a * b).sum();
        y[i] = (b[i] - s) / row[i];
    }
    y
}

/// Squared Mahalanobis norm `vᵀ A⁻¹ v` given the Cholesky factor of `A`.
pub fn mahalanobis_sq(l: &Matrix, v: &[f64]) -> f64 {
    solve_lower(l, v).iter().map(|z| z * z).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_factor() {
        let l = cholesky(&Matrix::identity(2)).unwrap();
        assert_eq!(l, Matrix::identity(2));
    }

    #[test]
    fn diagonal_square_roots() {
        let a = Matrix::from_rows(&[[4.0, 0.0], [0.0, 9.0]]).unwrap();
        let l = cholesky(&a).unwrap();
        assert_eq!(l.as_slice(), &[2.0, 0.0, 0.0, 3.0]);
        assert!((log_det_cholesky(&l) - 36f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn rejects_indefinite_and_asymmetric() {
        let a = Matrix::from_rows(&[[1.0, 2.0], [2.0, 1.0]]).unwrap();
        assert!(matches!(cholesky(&a), Err(Error::NotPositiveDefinite { index: 1, .. })));
        let b = Matrix::from_rows(&[[1.0, 0.5], [0.0, 1.0]]).unwrap();
        assert!(matches!(cholesky(&b), Err(Error::NotSymmetric { .. })));
        let z = Matrix::zeros(2, 2);
        assert!(cholesky(&z).is_err());
    }

    #[test]
    fn forward_substitution() {
        let l = Matrix::from_rows(&[[2.0, 0.0], [1.0, 3.0]]).unwrap();
        let y = solve_lower(&l, &[4.0, 11.0]);
        assert_eq!(y, vec![2.0, 3.0]);
    }
}
