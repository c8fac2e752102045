#![allow(dead_code)]

use dsest_core::{DescriptorSystem, Matrix};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn mat(rows: usize, cols: usize, v: &[f64]) -> Matrix {
    Matrix::from_row_slice(rows, cols, v)
}

pub fn vector(v: &[f64]) -> DVector<f64> {
    DVector::from_row_slice(v)
}

/// Singular four-state plant: `x1' = x1 + u`, `x2' = -x2 + x3 + u`,
/// `x3' = -x3 + u`, `0 = x4 + u`, measured `y = x1`, functional `z = x1 + x2 + x3 + x4`.
pub fn four_state() -> DescriptorSystem {
    let e = Matrix::from_diagonal(&vector(&[1.0, 1.0, 1.0, 0.0]));
    let a = mat(4, 4, &[1.0, 0.0, 0.0, 0.0, 0.0, -1.0, 1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
    let b = mat(4, 1, &[1.0, 1.0, 1.0, 1.0]);
    let c = mat(1, 4, &[1.0, 0.0, 0.0, 0.0]);
    let k = mat(1, 4, &[1.0, 1.0, 1.0, 1.0]);
    DescriptorSystem::new(e, a, b, c, Matrix::zeros(1, 1), k).unwrap()
}

/// `x2' = x1`, `0 = x2 + u`, no measurement, `z = x1 = -u'`.
pub fn derivative_functional() -> DescriptorSystem {
    DescriptorSystem::new(
        mat(2, 2, &[0.0, 1.0, 0.0, 0.0]),
        Matrix::identity(2, 2),
        mat(2, 1, &[0.0, 1.0]),
        Matrix::zeros(0, 2),
        Matrix::zeros(0, 1),
        mat(1, 2, &[1.0, 0.0]),
    )
    .unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn int_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.gen_range(-3i32..=3) as f64)
}

/// Integer matrix in `[-3, 3]` with a random set of rows and columns zeroed, so
/// that rank deficiency is common.
fn sparse_e(rng: &mut ChaCha8Rng, m: usize, n: usize) -> Matrix {
    let mut e = int_matrix(rng, m, n);
    for i in 0..m {
        if rng.gen_bool(0.3) {
            e.row_mut(i).fill(0.0);
        }
    }
    for j in 0..n {
        if rng.gen_bool(0.25) {
            e.column_mut(j).fill(0.0);
        }
    }
    e
}

pub fn random_pencil(rng: &mut ChaCha8Rng) -> (Matrix, Matrix) {
    let m = rng.gen_range(1..=5);
    let n = rng.gen_range(1..=5);
    (sparse_e(rng, m, n), int_matrix(rng, m, n))
}

/// Functional rows: dense random, a combination of the measurement, or unit rows.
pub fn random_k(rng: &mut ChaCha8Rng, n: usize, c: &Matrix) -> Matrix {
    let r = rng.gen_range(1..=n.min(3));
    match rng.gen_range(0..3) {
        0 => int_matrix(rng, r, n),
        1 if c.nrows() > 0 => int_matrix(rng, r, c.nrows()) * c,
        _ => {
            let mut k = Matrix::zeros(r, n);
            for i in 0..r {
                k[(i, rng.gen_range(0..n))] = 1.0;
            }
            k
        }
    }
}

/// Random `m, n <= 5` system with integer entries in `[-3, 3]`.
pub fn random_system(rng: &mut ChaCha8Rng) -> DescriptorSystem {
    let (e, a) = random_pencil(rng);
    let (m, n) = e.shape();
    let l = rng.gen_range(0..=2);
    let p = rng.gen_range(0..=2);
    let b = int_matrix(rng, m, l);
    let c = int_matrix(rng, p, n);
    let d = if rng.gen_bool(0.5) { Matrix::zeros(p, l) } else { int_matrix(rng, p, l) };
    let k = random_k(rng, n, &c);
    DescriptorSystem::new(e, a, b, c, d, k).unwrap()
}

/// Random system with `K = I`.
pub fn random_full_state(rng: &mut ChaCha8Rng) -> DescriptorSystem {
    let s = random_system(rng);
    let n = s.dims().n;
    s.with_k(Matrix::identity(n, n)).unwrap()
}

/// SVD rank with the threshold `max(rows, cols) * sigma_max * rtol`.
pub fn svd_rank(m: &Matrix, rtol: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = dsest_core::linalg::singular_values(m);
    let smax = sv.iter().copied().fold(0.0, f64::max);
    let thr = m.nrows().max(m.ncols()) as f64 * smax * rtol;
    sv.iter().filter(|&&s| s > thr).count()
}

pub fn max_abs(m: &Matrix) -> f64 {
    m.iter().fold(0.0f64, |a, v| a.max(v.abs()))
}

pub fn hstack(a: &Matrix, b: &Matrix) -> Matrix {
    assert_eq!(a.nrows(), b.nrows());
    let mut out = Matrix::zeros(a.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((0, a.ncols()), b.shape()).copy_from(b);
    out
}

pub fn vstack(a: &Matrix, b: &Matrix) -> Matrix {
    assert_eq!(a.ncols(), b.ncols());
    let mut out = Matrix::zeros(a.nrows() + b.nrows(), a.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((a.nrows(), 0), b.shape()).copy_from(b);
    out
}
