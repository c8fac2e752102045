//! Numerical linear algebra primitives: SVD ranks, subspace algebra,
//! eigenvalues, spectral splitting and output-injection pole placement.

mod dense;
mod exact;
mod place;
mod spectral;
mod subspace;

pub use dense::{eigenvalues, singular_values, singular_values_complex};
pub use exact::exact_rank;
pub use place::place_poles;
pub use spectral::{cluster_eigenvalues, spectral_split, SpectralSplit};
pub use subspace::Subspace;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type CMatrix = DMatrix<Complex64>;

/// Numerical tolerances shared by every stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerance {
    pub rank_rtol: f64,
    pub eig_stability_margin: f64,
    pub synthesis_margin: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance { rank_rtol: 1e-10, eig_stability_margin: 0.0, synthesis_margin: 0.5 }
    }
}

impl Tolerance {
    pub fn validate(&self) -> Result<()> {
        if !(self.rank_rtol > 0.0 && self.rank_rtol < 1e-2) {
            return Err(Error::Tolerance(format!("rank_rtol must lie in (0, 1e-2), got {}", self.rank_rtol)));
        }
        if !(self.eig_stability_margin >= 0.0 && self.eig_stability_margin.is_finite()) {
            return Err(Error::Tolerance(format!(
                "eig_stability_margin must be finite and non-negative, got {}",
                self.eig_stability_margin
            )));
        }
        if !(self.synthesis_margin > 0.0 && self.synthesis_margin.is_finite()) {
            return Err(Error::Tolerance(format!(
                "synthesis_margin must be finite and positive, got {}",
                self.synthesis_margin
            )));
        }
        Ok(())
    }

    pub fn relaxed(&self, factor: f64) -> Tolerance {
        Tolerance { rank_rtol: self.rank_rtol * factor, ..*self }
    }

    /// Absolute tolerance for residuals between orthonormal bases.
    pub fn subspace_atol(&self) -> f64 {
        (self.rank_rtol.sqrt() * 1e-3).max(1e-13)
    }

    /// Relative tolerance for certifying that structured blocks vanish.
    pub fn residual_rtol(&self) -> f64 {
        (self.rank_rtol * 1e2).max(1e-9)
    }
}

fn threshold(rows: usize, cols: usize, scale: f64, tol: &Tolerance) -> f64 {
    rows.max(cols) as f64 * scale * tol.rank_rtol
}

fn count_above(sv: &[f64], rows: usize, cols: usize, scale: f64, tol: &Tolerance) -> usize {
    let smax = sv.first().copied().unwrap_or(0.0).max(scale);
    let thr = threshold(rows, cols, smax, tol);
    sv.iter().filter(|&&s| s > thr).count()
}

/// Numeric rank: singular values above `max(rows, cols) * sigma_max * rank_rtol`.
pub fn numeric_rank(m: &Matrix, tol: &Tolerance) -> usize {
    count_above(&singular_values(m), m.nrows(), m.ncols(), 0.0, tol)
}

pub fn numeric_rank_complex(m: &CMatrix, tol: &Tolerance) -> usize {
    count_above(&singular_values_complex(m), m.nrows(), m.ncols(), 0.0, tol)
}

/// Rank with the threshold scaled by `max(sigma_max, scale)`, so that a product
/// whose entries are pure rounding noise is not mistaken for a nonzero map.
pub fn rank_scaled(m: &Matrix, scale: f64, tol: &Tolerance) -> usize {
    count_above(&singular_values(m), m.nrows(), m.ncols(), scale, tol)
}

/// Rank of a matrix assembled entrywise from data blocks (no arithmetic).
/// Exact when the entries are short dyadic rationals, otherwise singular values
/// above `sigma_max * rank_rtol * 1e-2`.
pub fn structured_rank(m: &Matrix, tol: &Tolerance) -> usize {
    if let Some(r) = exact_rank(m) {
        return r;
    }
    let sv = singular_values(m);
    let thr = sv.first().copied().unwrap_or(0.0) * tol.rank_rtol * STRUCTURED_FACTOR;
    sv.iter().filter(|&&s| s > thr).count()
}

pub const STRUCTURED_FACTOR: f64 = 1e-2;

pub fn has_full_row_rank(m: &Matrix, tol: &Tolerance) -> bool {
    numeric_rank(m, tol) == m.nrows()
}

pub fn has_full_col_rank(m: &Matrix, tol: &Tolerance) -> bool {
    numeric_rank(m, tol) == m.ncols()
}

pub fn norm2(m: &Matrix) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

pub fn max_abs(m: &Matrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

pub fn to_complex(m: &Matrix) -> CMatrix {
    m.map(|x| Complex64::new(x, 0.0))
}

/// Moore-Penrose pseudo-inverse.
pub fn pinv(m: &Matrix, tol: &Tolerance) -> Matrix {
    let (r, c) = m.shape();
    if r == 0 || c == 0 {
        return Matrix::zeros(c, r);
    }
    let svd = dense::svd_full(m);
    let smax = svd.s.first().copied().unwrap_or(0.0);
    let thr = threshold(r, c, smax, tol);
    let mut out = Matrix::zeros(c, r);
    for (i, &s) in svd.s.iter().enumerate() {
        if s > thr {
            out += svd.v.column(i) * svd.u.column(i).transpose() / s;
        }
    }
    out
}

/// Inverse of a square matrix, failing when it is numerically singular.
pub fn inverse(m: &Matrix, tol: &Tolerance) -> Result<Matrix> {
    if m.nrows() != m.ncols() {
        return Err(Error::shape(format!("inverse of non-square {}x{} matrix", m.nrows(), m.ncols())));
    }
    if m.nrows() == 0 {
        return Ok(Matrix::zeros(0, 0));
    }
    if numeric_rank(m, tol) < m.nrows() {
        return Err(Error::Numerical("matrix is numerically singular".into()));
    }
    m.clone()
        .try_inverse()
        .ok_or_else(|| Error::Numerical("LU inversion failed".into()))
}

/// 2-norm condition number; infinite for singular or empty-but-rectangular input.
pub fn condition_number(m: &Matrix) -> f64 {
    let sv = singular_values(m);
    match (sv.first(), sv.last()) {
        (Some(&a), Some(&b)) if b > 0.0 && m.nrows() == m.ncols() => a / b,
        (None, None) if m.nrows() == m.ncols() => 1.0,
        _ => f64::INFINITY,
    }
}

/// Horizontal concatenation; all parts must share a row count.
pub fn hcat(parts: &[&Matrix]) -> Matrix {
    let rows = parts.first().map_or(0, |p| p.nrows());
    let cols: usize = parts.iter().map(|p| p.ncols()).sum();
    let mut out = Matrix::zeros(rows, cols);
    let mut c = 0;
    for p in parts {
        assert_eq!(p.nrows(), rows, "hcat row mismatch");
        out.view_mut((0, c), p.shape()).copy_from(*p);
        c += p.ncols();
    }
    out
}

/// Vertical concatenation; all parts must share a column count.
pub fn vcat(parts: &[&Matrix]) -> Matrix {
    let cols = parts.first().map_or(0, |p| p.ncols());
    let rows: usize = parts.iter().map(|p| p.nrows()).sum();
    let mut out = Matrix::zeros(rows, cols);
    let mut r = 0;
    for p in parts {
        assert_eq!(p.ncols(), cols, "vcat column mismatch");
        out.view_mut((r, 0), p.shape()).copy_from(*p);
        r += p.nrows();
    }
    out
}

pub fn block_diag(parts: &[&Matrix]) -> Matrix {
    let rows: usize = parts.iter().map(|p| p.nrows()).sum();
    let cols: usize = parts.iter().map(|p| p.ncols()).sum();
    let mut out = Matrix::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for p in parts {
        out.view_mut((r, c), p.shape()).copy_from(*p);
        r += p.nrows();
        c += p.ncols();
    }
    out
}

/// Copy of the sub-block starting at `(r, c)` with the given shape.
pub fn block(m: &Matrix, r: usize, c: usize, rows: usize, cols: usize) -> Matrix {
    m.view((r, c), (rows, cols)).into_owned()
}

/// Offsets of consecutive partitions.
pub(crate) fn offsets(sizes: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(sizes.len() + 1);
    let mut acc = 0;
    out.push(0);
    for s in sizes {
        acc += s;
        out.push(acc);
    }
    out
}

/// Replace entries below `eps` in magnitude by exact zeros.
pub(crate) fn snap_zeros(m: &mut Matrix, eps: f64) {
    for x in m.iter_mut() {
        if x.abs() < eps {
            *x = 0.0;
        }
    }
}

/// Columns of the reduced row echelon form of `basis^T`, transposed back.
/// Gives a canonical spanning set for the column span of an orthonormal basis.
pub fn echelon_basis(basis: &Matrix, pivot_tol: f64) -> Matrix {
    let (n, k) = basis.shape();
    let mut r = basis.transpose();
    let mut row = 0;
    for col in 0..n {
        if row == k {
            break;
        }
        let (mut best, mut best_val) = (row, 0.0);
        for i in row..k {
            if r[(i, col)].abs() > best_val {
                best = i;
                best_val = r[(i, col)].abs();
            }
        }
        if best_val <= pivot_tol {
            continue;
        }
        r.swap_rows(row, best);
        let p = r[(row, col)];
        for j in 0..n {
            r[(row, j)] /= p;
        }
        r[(row, col)] = 1.0;
        for i in 0..k {
            if i != row {
                let f = r[(i, col)];
                if f != 0.0 {
                    for j in 0..n {
                        r[(i, j)] -= f * r[(row, j)];
                    }
                    r[(i, col)] = 0.0;
                }
            }
        }
        row += 1;
    }
    let mut out = r.rows(0, row).transpose();
    snap_zeros(&mut out, 1e-12);
    out
}

/// Kronecker product.
pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    a.kronecker(b)
}

/// Column-major vectorisation.
pub fn vec_of(m: &Matrix) -> nalgebra::DVector<f64> {
    nalgebra::DVector::from_column_slice(m.as_slice())
}

pub fn unvec(v: &[f64], rows: usize, cols: usize) -> Matrix {
    Matrix::from_column_slice(rows, cols, v)
}

/// Minimum-norm least-squares solution of `G x = b`.
pub fn lstsq(g: &Matrix, b: &nalgebra::DVector<f64>, tol: &Tolerance) -> nalgebra::DVector<f64> {
    if g.ncols() == 0 {
        return nalgebra::DVector::zeros(0);
    }
    pinv(g, tol) * b
}

/// Deterministic probe points used for "generic" rank evaluations.
pub fn sample_points() -> [Complex64; 4] {
    [
        Complex64::new(0.713_264_9, 0.318_309_9),
        Complex64::new(-1.377_551_2, 0.0),
        Complex64::new(2.236_067_9, -1.414_213_6),
        Complex64::new(0.0, 1.732_050_8),
    ]
}
