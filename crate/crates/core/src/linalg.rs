//! Closed-form helpers for the tiny symmetric matrices used by the filter.

use nalgebra::{DMatrix, Matrix2};

pub fn is_symmetric(m: &Matrix2<f64>, tol: f64) -> bool {
    (m[(0, 1)] - m[(1, 0)]).abs() <= tol
}

pub fn symmetrize(m: &Matrix2<f64>) -> Matrix2<f64> {
    (m + m.transpose()) * 0.5
}

/// Eigenvalues `(min, max)` of the symmetric part of a 2×2 matrix.
pub fn eigenvalues(m: &Matrix2<f64>) -> (f64, f64) {
    let a = m[(0, 0)];
    let d = m[(1, 1)];
    let b = 0.5 * (m[(0, 1)] + m[(1, 0)]);
    let mid = 0.5 * (a + d);
    let rad = (0.25 * (a - d) * (a - d) + b * b).sqrt();
    (mid - rad, mid + rad)
}

pub fn min_eigenvalue(m: &Matrix2<f64>) -> f64 {
    eigenvalues(m).0
}

pub fn max_eigenvalue(m: &Matrix2<f64>) -> f64 {
    eigenvalues(m).1
}

/// Ratio of extreme eigenvalues of a symmetric matrix, infinite when the
/// smallest is not positive.
pub fn condition_estimate(s: &DMatrix<f64>) -> f64 {
    let (lo, hi) = match s.nrows() {
        1 => (s[(0, 0)], s[(0, 0)]),
        2 => {
            let m = Matrix2::new(s[(0, 0)], s[(0, 1)], s[(1, 0)], s[(1, 1)]);
            let hi = eigenvalues(&m).1;
            // det/hi avoids the cancellation in mid - rad
            let b = 0.5 * (m[(0, 1)] + m[(1, 0)]);
            (
                if hi > 0.0 {
                    (m[(0, 0)] * m[(1, 1)] - b * b) / hi
                } else {
                    hi
                },
                hi,
            )
        }
        _ => {
            let eig = s.clone().symmetric_eigen().eigenvalues;
            (
                eig.iter().copied().fold(f64::INFINITY, f64::min),
                eig.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            )
        }
    };
    if lo <= 0.0 || !lo.is_finite() || !hi.is_finite() {
        f64::INFINITY
    } else {
        hi / lo
    }
}
