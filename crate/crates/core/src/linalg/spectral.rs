use num_complex::Complex64;

use super::{block, eigenvalues, inverse, max_abs, norm2, Matrix, Subspace, Tolerance};
use crate::error::{Error, Result};

/// Replace every group of eigenvalues lying within a relative radius of each
/// other by the group mean. Defective eigenvalues scatter around the exact value
/// at O(eps^(1/k)); the mean of the cluster is accurate to O(eps).
pub fn cluster_eigenvalues(eigs: &[Complex64], radius: f64) -> Vec<Complex64> {
    let n = eigs.len();
    let mut group: Vec<usize> = (0..n).collect();
    fn find(g: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while g[r] != r {
            r = g[r];
        }
        g[i] = r;
        r
    }
    for i in 0..n {
        for j in i + 1..n {
            let scale = 1.0_f64.max(eigs[i].norm()).max(eigs[j].norm());
            if (eigs[i] - eigs[j]).norm() <= radius * scale {
                let (a, b) = (find(&mut group, i), find(&mut group, j));
                group[a.max(b)] = a.min(b);
            }
        }
    }
    let roots: Vec<usize> = (0..n).map(|i| find(&mut group, i)).collect();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let members: Vec<usize> = (0..n).filter(|&j| roots[j] == roots[i]).collect();
        let mean = members.iter().map(|&j| eigs[j]).sum::<Complex64>() / members.len() as f64;
        out.push(mean);
    }
    out
}

#[derive(Debug, Clone)]
pub struct SpectralSplit {
    /// Invertible T with `T^-1 M T = diag(plus, minus)`.
    pub t: Matrix,
    pub t_inv: Matrix,
    /// Block with spectrum in `Re >= -margin`.
    pub plus: Matrix,
    /// Block with spectrum in `Re < -margin`.
    pub minus: Matrix,
}

const CLASSIFY_SLACK: f64 = 1e-9;
const MIN_GAP: f64 = 1e-6;

/// Block-diagonalise `m` into the parts with spectrum right and left of
/// `Re = -margin`, via invariant subspaces from the matrix sign function.
pub fn spectral_split(m: &Matrix, margin: f64, tol: &Tolerance) -> Result<SpectralSplit> {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "spectral_split of non-square matrix");
    let scale = norm2(m).max(1.0);
    let eigs = cluster_eigenvalues(&eigenvalues(m), 1e-5);
    let boundary = -margin;
    let (plus, minus): (Vec<Complex64>, Vec<Complex64>) =
        eigs.iter().partition(|e| e.re >= boundary - CLASSIFY_SLACK * scale);
    if let Some(e) = minus.iter().find(|e| e.re > boundary - MIN_GAP * scale) {
        return Err(Error::IllConditionedSplit { re: e.re, im: e.im, gap: boundary - e.re, boundary });
    }
    let identity = || Matrix::identity(n, n);
    if minus.is_empty() {
        return Ok(SpectralSplit { t: identity(), t_inv: identity(), plus: m.clone(), minus: Matrix::zeros(0, 0) });
    }
    if plus.is_empty() {
        return Ok(SpectralSplit { t: identity(), t_inv: identity(), plus: Matrix::zeros(0, 0), minus: m.clone() });
    }
    let lo_plus = plus.iter().map(|e| e.re).fold(f64::INFINITY, f64::min);
    let hi_minus = minus.iter().copied().fold(None::<Complex64>, |acc, e| match acc {
        Some(a) if a.re >= e.re => Some(a),
        _ => Some(e),
    });
    let hi_minus = hi_minus.expect("minus is nonempty");
    if lo_plus - hi_minus.re < MIN_GAP * scale {
        return Err(Error::IllConditionedSplit {
            re: hi_minus.re,
            im: hi_minus.im,
            gap: lo_plus - hi_minus.re,
            boundary,
        });
    }
    let shift = 0.5 * (lo_plus + hi_minus.re);
    let sign = matrix_sign(&(m - Matrix::identity(n, n) * shift), tol)?;
    let id = Matrix::identity(n, n);
    let p_plus = (&id + &sign) * 0.5;
    let p_minus = (&id - &sign) * 0.5;
    let s_plus = Subspace::image(&p_plus, tol);
    let s_minus = Subspace::image(&p_minus, tol);
    if s_plus.dim() != plus.len() || s_minus.dim() != minus.len() {
        return Err(Error::cert(
            "spectral split",
            format!(
                "invariant subspace dimensions {}+{} do not match eigenvalue counts {}+{}",
                s_plus.dim(),
                s_minus.dim(),
                plus.len(),
                minus.len()
            ),
        ));
    }
    let t = super::hcat(&[&s_plus.echelon(tol), &s_minus.echelon(tol)]);
    let t_inv = inverse(&t, tol)?;
    let mut d = &t_inv * m * &t;
    let k = plus.len();
    let off = max_abs(&block(&d, 0, k, k, n - k)).max(max_abs(&block(&d, k, 0, n - k, k)));
    if off > tol.residual_rtol() * scale {
        return Err(Error::cert("spectral split", format!("off-diagonal residual {off:.3e}")));
    }
    super::snap_zeros(&mut d, 1e-14 * scale);
    Ok(SpectralSplit { plus: block(&d, 0, 0, k, k), minus: block(&d, k, k, n - k, n - k), t, t_inv })
}

fn matrix_sign(m: &Matrix, tol: &Tolerance) -> Result<Matrix> {
    let mut s = m.clone();
    for _ in 0..200 {
        let inv = inverse(&s, tol).map_err(|_| Error::Numerical("sign iteration hit a singular iterate".into()))?;
        let next = (&s + inv) * 0.5;
        let delta = (&next - &s).norm();
        s = next;
        if delta <= 1e-14 * s.norm().max(1.0) {
            return Ok(s);
        }
    }
    Err(Error::Numerical("matrix sign iteration did not converge".into()))
}
