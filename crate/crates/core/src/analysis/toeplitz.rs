//! Block matrices used by the rank criteria.

use num_complex::Complex64;

use crate::linalg::{hcat, to_complex, CMatrix, Matrix};

/// `k x k` block upper bidiagonal matrix with `e` on the diagonal and `a` on the
/// superdiagonal.
pub fn build_f(e: &Matrix, a: &Matrix, k: usize) -> Matrix {
    assert_eq!(e.shape(), a.shape(), "build_f: E and A differ in shape");
    assert!(k >= 1, "build_f: depth must be positive");
    let (m, n) = e.shape();
    let mut out = Matrix::zeros(k * m, k * n);
    for i in 0..k {
        out.view_mut((i * m, i * n), (m, n)).copy_from(e);
        if i + 1 < k {
            out.view_mut((i * m, (i + 1) * n), (m, n)).copy_from(a);
        }
    }
    out
}

/// `build_f` with the row block `[0, K, 0, ..., 0]` appended.
pub fn build_f_k(e: &Matrix, a: &Matrix, kmat: &Matrix, k: usize) -> Matrix {
    assert_eq!(kmat.ncols(), e.ncols(), "build_f_k: K has the wrong width");
    let f = build_f(e, a, k);
    let (rows, cols) = f.shape();
    let n = e.ncols();
    let mut out = Matrix::zeros(rows + kmat.nrows(), cols);
    out.view_mut((0, 0), (rows, cols)).copy_from(&f);
    let col = n * 1.min(k - 1);
    out.view_mut((rows, col), kmat.shape()).copy_from(kmat);
    out
}

/// `[E, 0]` and `[A, B]`, acting on stacked `[x; u]`.
pub fn script_pair(e: &Matrix, a: &Matrix, b: &Matrix) -> (Matrix, Matrix) {
    let (m, l) = (e.nrows(), b.ncols());
    (hcat(&[e, &Matrix::zeros(m, l)]), hcat(&[a, b]))
}

/// Rows and columns of the causality block matrix, for callers that slice it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CausalityLayout {
    pub top_rows: usize,
    pub left_cols: usize,
    pub c_rows: usize,
    pub lower_rows: usize,
    pub k_rows: usize,
    pub right_cols: usize,
}

/// The causality test matrix
///
/// ```text
/// [ F_n[[e 0],[a b]]   A_cpl          ]
/// [ 0                  [c 0 ... 0]    ]   (when c is given)
/// [ 0                  F_n[lower_e, lower_a] ]
/// [ 0                  [k 0 ... 0]    ]   (when k is given)
/// ```
///
/// where `A_cpl` is zero except for `a` in its last row block and first column block.
#[allow(clippy::too_many_arguments)]
pub fn causality_matrix(
    e: &Matrix,
    a: &Matrix,
    b: &Matrix,
    lower_e: &Matrix,
    lower_a: &Matrix,
    c: Option<&Matrix>,
    k: Option<&Matrix>,
    blocks: usize,
) -> (Matrix, CausalityLayout) {
    let (m, n) = e.shape();
    let (se, sa) = script_pair(e, a, b);
    let top = build_f(&se, &sa, blocks);
    let lower = build_f(lower_e, lower_a, blocks);
    let layout = CausalityLayout {
        top_rows: top.nrows(),
        left_cols: top.ncols(),
        c_rows: c.map_or(0, |c| c.nrows()),
        lower_rows: lower.nrows(),
        k_rows: k.map_or(0, |k| k.nrows()),
        right_cols: blocks * n,
    };
    let rows = layout.top_rows + layout.c_rows + layout.lower_rows + layout.k_rows;
    let cols = layout.left_cols + layout.right_cols;
    let mut out = Matrix::zeros(rows, cols);
    out.view_mut((0, 0), top.shape()).copy_from(&top);
    out.view_mut(((blocks - 1) * m, layout.left_cols), (m, n)).copy_from(a);
    let mut r = layout.top_rows;
    if let Some(c) = c {
        out.view_mut((r, layout.left_cols), c.shape()).copy_from(c);
        r += c.nrows();
    }
    out.view_mut((r, layout.left_cols), lower.shape()).copy_from(&lower);
    r += lower.nrows();
    if let Some(k) = k {
        out.view_mut((r, layout.left_cols), k.shape()).copy_from(k);
    }
    (out, layout)
}

/// The coupling column block `[0; ...; 0; a]` with `blocks` row blocks.
pub fn coupling_first_block(a: &Matrix, blocks: usize) -> Matrix {
    let (m, n) = a.shape();
    let mut out = Matrix::zeros(blocks * m, n);
    out.view_mut(((blocks - 1) * m, 0), (m, n)).copy_from(a);
    out
}

/// Full coupling matrix with `blocks x blocks` blocks.
pub fn coupling(a: &Matrix, blocks: usize) -> Matrix {
    let (m, n) = a.shape();
    let mut out = Matrix::zeros(blocks * m, blocks * n);
    out.view_mut(((blocks - 1) * m, 0), (m, n)).copy_from(a);
    out
}

/// `[m, 0, ..., 0]` with `blocks` column blocks.
pub fn first_block_row(m: &Matrix, blocks: usize) -> Matrix {
    let mut out = Matrix::zeros(m.nrows(), blocks * m.ncols());
    out.view_mut((0, 0), m.shape()).copy_from(m);
    out
}

/// Detectability test matrices at `lambda`: `blocks` diagonal blocks of
/// `lambda E - A` with `E` on the block subdiagonal, and the same matrix with
/// `[0, ..., 0, K]` appended.
pub fn detectability_pair(e: &Matrix, a: &Matrix, kmat: &Matrix, lambda: Complex64, blocks: usize) -> (CMatrix, CMatrix) {
    let (m, n) = e.shape();
    let ce = to_complex(e);
    let diag = &ce * lambda - to_complex(a);
    let mut base = CMatrix::zeros(blocks * m, blocks * n);
    for i in 0..blocks {
        base.view_mut((i * m, i * n), (m, n)).copy_from(&diag);
        if i + 1 < blocks {
            base.view_mut(((i + 1) * m, i * n), (m, n)).copy_from(&ce);
        }
    }
    let mut with_k = CMatrix::zeros(blocks * m + kmat.nrows(), blocks * n);
    with_k.view_mut((0, 0), base.shape()).copy_from(&base);
    if blocks > 0 {
        with_k.view_mut((blocks * m, (blocks - 1) * n), kmat.shape()).copy_from(&to_complex(kmat));
    }
    (base, with_k)
}
