//! Dense factorizations backed by faer.

use faer::Mat;
use num_complex::Complex64;

use super::{CMatrix, Matrix};

fn to_faer(m: &Matrix) -> Mat<f64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn to_faer_complex(m: &CMatrix) -> Mat<Complex64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn from_faer(m: faer::MatRef<'_, f64>) -> Matrix {
    Matrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Full SVD `m = U diag(s) V^T` with square `U`, `V` and `s` descending.
pub(crate) struct FullSvd {
    pub u: Matrix,
    pub s: Vec<f64>,
    pub v: Matrix,
}

pub(crate) fn svd_full(m: &Matrix) -> FullSvd {
    let (r, c) = m.shape();
    if r == 0 || c == 0 {
        return FullSvd { u: Matrix::identity(r, r), s: Vec::new(), v: Matrix::identity(c, c) };
    }
    let svd = to_faer(m).svd().expect("SVD did not converge");
    let s = svd.S().column_vector().iter().copied().collect();
    FullSvd { u: from_faer(svd.U()), s, v: from_faer(svd.V()) }
}

/// Singular values, descending.
pub fn singular_values(m: &Matrix) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    to_faer(m).singular_values().expect("SVD did not converge")
}

pub fn singular_values_complex(m: &CMatrix) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    to_faer_complex(m).singular_values().expect("SVD did not converge")
}

/// Eigenvalues of a square real matrix.
pub fn eigenvalues(m: &Matrix) -> Vec<Complex64> {
    assert_eq!(m.nrows(), m.ncols(), "eigenvalues of non-square matrix");
    if m.nrows() == 0 {
        return Vec::new();
    }
    to_faer(m).eigenvalues().expect("eigenvalue iteration did not converge")
}
