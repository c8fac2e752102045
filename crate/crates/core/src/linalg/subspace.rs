use super::{dense, echelon_basis, max_abs, norm2, Matrix, Tolerance};

/// A linear subspace of R^n stored as an orthonormal basis (n x dim).
#[derive(Debug, Clone, PartialEq)]
pub struct Subspace {
    basis: Matrix,
}

/// Orthonormal basis of the span of those left singular vectors whose singular
/// value exceeds the threshold, plus the complementary right singular vectors.
fn split_svd(m: &Matrix, scale: f64, tol: &Tolerance) -> (Matrix, Matrix) {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return (Matrix::zeros(rows, 0), Matrix::identity(cols, cols));
    }
    let svd = dense::svd_full(m);
    let smax = svd.s.first().copied().unwrap_or(0.0).max(scale);
    let thr = rows.max(cols) as f64 * smax * tol.rank_rtol;
    let r = svd.s.iter().filter(|&&s| s > thr).count();
    let image = svd.u.columns(0, r).into_owned();
    let kernel = svd.v.columns(r, cols - r).into_owned();
    (image, kernel)
}

impl Subspace {
    pub fn zero(n: usize) -> Self {
        Subspace { basis: Matrix::zeros(n, 0) }
    }

    pub fn full(n: usize) -> Self {
        Subspace { basis: Matrix::identity(n, n) }
    }

    /// Column span of `m`.
    pub fn image(m: &Matrix, tol: &Tolerance) -> Self {
        Self::image_scaled(m, 0.0, tol)
    }

    pub(crate) fn image_scaled(m: &Matrix, scale: f64, tol: &Tolerance) -> Self {
        Subspace { basis: split_svd(m, scale, tol).0 }
    }

    /// Null space of `m`.
    pub fn kernel(m: &Matrix, tol: &Tolerance) -> Self {
        Self::kernel_scaled(m, 0.0, tol)
    }

    pub(crate) fn kernel_scaled(m: &Matrix, scale: f64, tol: &Tolerance) -> Self {
        Subspace { basis: split_svd(m, scale, tol).1 }
    }

    /// `{x : m x in s}`.
    pub fn preimage(m: &Matrix, s: &Subspace, tol: &Tolerance) -> Self {
        assert_eq!(m.nrows(), s.ambient_dim(), "preimage dimension mismatch");
        if s.dim() == s.ambient_dim() {
            return Subspace::full(m.ncols());
        }
        let z = s.complement_projector();
        Self::kernel_scaled(&(z * m), norm2(m), tol)
    }

    /// `m s`, the image of the subspace under `m`.
    pub fn map(&self, m: &Matrix, tol: &Tolerance) -> Self {
        assert_eq!(m.ncols(), self.ambient_dim(), "map dimension mismatch");
        Self::image_scaled(&(m * &self.basis), norm2(m), tol)
    }

    pub fn sum(&self, other: &Subspace, tol: &Tolerance) -> Self {
        assert_eq!(self.ambient_dim(), other.ambient_dim(), "sum dimension mismatch");
        let joined = super::hcat(&[&self.basis, &other.basis]);
        Self::image_scaled(&joined, 1.0, tol)
    }

    pub fn intersect(&self, other: &Subspace, tol: &Tolerance) -> Self {
        assert_eq!(self.ambient_dim(), other.ambient_dim(), "intersect dimension mismatch");
        let stacked = super::vcat(&[&self.complement_projector(), &other.complement_projector()]);
        Self::kernel_scaled(&stacked, 1.0, tol)
    }

    /// Orthogonal complement in the ambient space.
    pub fn complement(&self) -> Self {
        let n = self.ambient_dim();
        if self.dim() == 0 {
            return Subspace::full(n);
        }
        let tol = Tolerance::default();
        Self::kernel_scaled(&self.basis.transpose(), 1.0, &tol)
    }

    /// Orthogonal complement of `self` inside `within`.
    pub fn complement_in(&self, within: &Subspace, tol: &Tolerance) -> Self {
        self.complement().intersect(within, tol)
    }

    pub fn contains(&self, other: &Subspace, tol: &Tolerance) -> bool {
        self.residual_of(&other.basis) <= tol.subspace_atol()
    }

    /// Largest distance of a basis column of `m` (normalised) from this subspace.
    pub fn residual_of(&self, m: &Matrix) -> f64 {
        if m.ncols() == 0 {
            return 0.0;
        }
        let res = self.complement_projector() * m;
        let mut worst = 0.0_f64;
        for j in 0..m.ncols() {
            let nrm = m.column(j).norm();
            if nrm > 0.0 {
                worst = worst.max(res.column(j).norm() / nrm);
            }
        }
        worst
    }

    pub fn equals(&self, other: &Subspace, tol: &Tolerance) -> bool {
        self.dim() == other.dim() && self.contains(other, tol) && other.contains(self, tol)
    }

    pub fn is_zero(&self) -> bool {
        self.dim() == 0
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn basis(&self) -> &Matrix {
        &self.basis
    }

    pub fn projector(&self) -> Matrix {
        &self.basis * self.basis.transpose()
    }

    pub fn complement_projector(&self) -> Matrix {
        let n = self.ambient_dim();
        Matrix::identity(n, n) - self.projector()
    }

    /// Canonical (reduced echelon) spanning columns; deterministic for a given subspace.
    pub fn echelon(&self, tol: &Tolerance) -> Matrix {
        let e = echelon_basis(&self.basis, tol.subspace_atol());
        debug_assert_eq!(e.ncols(), self.dim());
        e
    }

    /// True when every vector of the subspace is annihilated by `m`.
    pub fn annihilated_by(&self, m: &Matrix, tol: &Tolerance) -> bool {
        if self.dim() == 0 || m.nrows() == 0 {
            return true;
        }
        let scale = norm2(m).max(1.0);
        max_abs(&(m * &self.basis)) <= tol.subspace_atol() * scale
    }
}
