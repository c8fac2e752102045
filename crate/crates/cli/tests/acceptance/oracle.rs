//! Reference computations that share no code path with the library's analysis.

use dsest_core::linalg::{eigenvalues, singular_values_complex};
use dsest_core::{DescriptorSystem, Matrix};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

const P: u64 = 1_000_000_007;

type ModMat = Vec<Vec<u64>>;

fn to_mod(m: &Matrix) -> ModMat {
    (0..m.nrows())
        .map(|i| {
            (0..m.ncols())
                .map(|j| {
                    let v = m[(i, j)];
                    assert!(v.fract() == 0.0 && v.abs() < 1e15, "oracle expects integer data, got {v}");
                    (v as i64).rem_euclid(P as i64) as u64
                })
                .collect()
        })
        .collect()
}

fn inv(a: u64) -> u64 {
    let (mut r, mut b, mut e) = (1u64, a % P, P - 2);
    while e > 0 {
        if e & 1 == 1 {
            r = r * b % P;
        }
        b = b * b % P;
        e >>= 1;
    }
    r
}

/// Reduced row echelon form in place; returns the pivot columns.
fn rref(m: &mut ModMat, ncols: usize) -> Vec<usize> {
    let mut pivots = Vec::new();
    let mut row = 0;
    for c in 0..ncols {
        let Some(p) = (row..m.len()).find(|&i| m[i][c] != 0) else { continue };
        m.swap(row, p);
        let iv = inv(m[row][c]);
        for x in m[row].iter_mut() {
            *x = *x * iv % P;
        }
        for i in 0..m.len() {
            if i != row && m[i][c] != 0 {
                let f = m[i][c];
                for j in 0..ncols {
                    m[i][j] = (m[i][j] + P - f * m[row][j] % P) % P;
                }
            }
        }
        pivots.push(c);
        row += 1;
    }
    pivots
}

fn rank_mod(m: &ModMat, ncols: usize) -> usize {
    let mut w = m.clone();
    rref(&mut w, ncols).len()
}

/// Kernel basis as columns.
fn kernel_mod(m: &ModMat, ncols: usize) -> Vec<Vec<u64>> {
    let mut w = m.clone();
    let pivots = rref(&mut w, ncols);
    let free: Vec<usize> = (0..ncols).filter(|c| !pivots.contains(c)).collect();
    free.iter()
        .map(|&f| {
            let mut v = vec![0u64; ncols];
            v[f] = 1;
            for (r, &pc) in pivots.iter().enumerate() {
                v[pc] = (P - w[r][f]) % P;
            }
            v
        })
        .collect()
}

fn zeros(r: usize, c: usize) -> ModMat {
    vec![vec![0; c]; r]
}

/// `[[E 0], [A B]]` Toeplitz block with `blocks` block rows: `[E 0]` on the diagonal and
/// `[A B]` on the superdiagonal.
fn script_f(e: &Matrix, a: &Matrix, b: &Matrix, blocks: usize) -> ModMat {
    let (m, n) = e.shape();
    let l = b.ncols();
    let w = n + l;
    let (em, am, bm) = (to_mod(e), to_mod(a), to_mod(b));
    let mut out = zeros(blocks * m, blocks * w);
    for k in 0..blocks {
        for i in 0..m {
            for j in 0..n {
                out[k * m + i][k * w + j] = em[i][j];
            }
            if k + 1 < blocks {
                for j in 0..n {
                    out[k * m + i][(k + 1) * w + j] = am[i][j];
                }
                for j in 0..l {
                    out[k * m + i][(k + 1) * w + n + j] = bm[i][j];
                }
            }
        }
    }
    out
}

/// `A_1^-1(im F) ∩ ker C ∩ ker E = {0}`, decided exactly over a prime field.
pub fn causal_subspace_condition(sys: &DescriptorSystem) -> bool {
    let (m, n) = sys.e.shape();
    let l = sys.b.ncols();
    let mut ec = to_mod(&sys.e);
    ec.extend(to_mod(&sys.c));
    let z = kernel_mod(&ec, n);
    if z.is_empty() {
        return true;
    }
    let f = script_f(&sys.e, &sys.a, &sys.b, n);
    let fcols = n * (n + l);
    let am = to_mod(&sys.a);
    let mut joined = f.clone();
    for (i, row) in joined.iter_mut().enumerate() {
        let block = i / m;
        let r = i % m;
        for zv in &z {
            let v = if block == n - 1 { (0..n).fold(0, |acc, j| (acc + am[r][j] * zv[j]) % P) } else { 0 };
            row.push(v);
        }
    }
    rank_mod(&joined, fcols + z.len()) == rank_mod(&f, fcols) + z.len()
}

fn tall_pencil(sys: &DescriptorSystem, lam: Complex64) -> DMatrix<Complex64> {
    let (m, n) = sys.e.shape();
    let p = sys.c.nrows();
    DMatrix::from_fn(m + p, n, |i, j| {
        if i < m {
            lam * sys.e[(i, j)] - sys.a[(i, j)]
        } else {
            Complex64::new(-sys.c[(i - m, j)], 0.0)
        }
    })
}

fn rank_deficient(sys: &DescriptorSystem, lam: Complex64) -> bool {
    let n = sys.e.ncols();
    let sv = singular_values_complex(&tall_pencil(sys, lam));
    let smax = sv.first().copied().unwrap_or(0.0);
    sv.len() < n || sv[n - 1] <= 1e-7 * smax.max(1.0)
}

/// `rank [sE - A; C] = n` for every `s` with `Re s >= 0`. Candidate points are the
/// eigenvalues of a random square projection of the tall pencil.
pub fn classically_detectable(sys: &DescriptorSystem, rng: &mut ChaCha8Rng) -> bool {
    let (m, n) = sys.e.shape();
    let p = sys.c.nrows();
    if m + p < n {
        return false;
    }
    let generic = Complex64::new(0.5371, 0.2213);
    if rank_deficient(sys, generic) {
        return false;
    }
    let ec = DMatrix::from_fn(m + p, n, |i, j| if i < m { sys.e[(i, j)] } else { 0.0 });
    let ac = DMatrix::from_fn(m + p, n, |i, j| if i < m { sys.a[(i, j)] } else { -sys.c[(i - m, j)] });
    let w = Matrix::from_fn(n, m + p, |_, _| rng.gen_range(-1.0..1.0));
    let (we, wa) = (&w * &ec, &w * &ac);
    let shift = 0.731;
    let g = &we * shift - &wa;
    let gi = g.try_inverse().expect("random projection gave a singular shifted pencil");
    let finite: Vec<Complex64> = eigenvalues(&(gi * &we))
        .into_iter()
        .filter(|nu| nu.norm() > 1e-12)
        .map(|nu| Complex64::new(shift, 0.0) - Complex64::new(1.0, 0.0) / nu)
        .collect();
    for lam in cluster_means(&finite, 1e-3) {
        if lam.re >= -1e-6 && rank_deficient(sys, lam) {
            return false;
        }
    }
    true
}

/// Means of groups of points closer than `radius` (relative).
fn cluster_means(points: &[Complex64], radius: f64) -> Vec<Complex64> {
    let mut used = vec![false; points.len()];
    let mut out = Vec::new();
    for i in 0..points.len() {
        if used[i] {
            continue;
        }
        let mut group = vec![i];
        used[i] = true;
        let mut k = 0;
        while k < group.len() {
            let g = points[group[k]];
            for j in 0..points.len() {
                if !used[j] && (points[j] - g).norm() <= radius * g.norm().max(1.0) {
                    used[j] = true;
                    group.push(j);
                }
            }
            k += 1;
        }
        let sum: Complex64 = group.iter().map(|&j| points[j]).sum();
        out.push(sum / group.len() as f64);
        out.extend(group.iter().map(|&j| points[j]));
    }
    out
}
