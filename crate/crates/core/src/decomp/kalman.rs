use crate::error::{Error, Result};
use crate::linalg::{
    block, hcat, inverse, max_abs, norm2, numeric_rank, numeric_rank_complex, offsets, sample_points, snap_zeros,
    to_complex, Matrix, Subspace, Tolerance,
};
use crate::wong::wong_limits;

/// `S (sE - A) T` block upper triangular with `S B = [B_1; 0; 0]`, where the
/// `(1,1)` triple is completely controllable, `E_22` is invertible and
/// `sE_33 - A_33` has full column rank for every `s`.
#[derive(Debug, Clone)]
pub struct Kalman {
    pub s: Matrix,
    pub t: Matrix,
    pub rows: [usize; 3],
    pub cols: [usize; 3],
    /// `S E T`, `S A T` and `S B`.
    pub e: Matrix,
    pub a: Matrix,
    pub b: Matrix,
}

impl Kalman {
    pub fn e_block(&self, i: usize, j: usize) -> Matrix {
        self.sub(&self.e, i, j)
    }

    pub fn a_block(&self, i: usize, j: usize) -> Matrix {
        self.sub(&self.a, i, j)
    }

    pub fn b_block(&self, i: usize) -> Matrix {
        let ro = offsets(&self.rows);
        block(&self.b, ro[i], 0, self.rows[i], self.b.ncols())
    }

    fn sub(&self, m: &Matrix, i: usize, j: usize) -> Matrix {
        let ro = offsets(&self.rows);
        let co = offsets(&self.cols);
        block(m, ro[i], co[j], self.rows[i], self.cols[j])
    }

    /// `m T` split into the three column blocks.
    pub fn split_cols(&self, m: &Matrix) -> [Matrix; 3] {
        let mt = m * &self.t;
        let co = offsets(&self.cols);
        std::array::from_fn(|j| block(&mt, 0, co[j], mt.nrows(), self.cols[j]))
    }
}

pub fn kalman(e: &Matrix, a: &Matrix, b: &Matrix, tol: &Tolerance) -> Result<Kalman> {
    let (m, n) = e.shape();
    let wong = wong_limits(e, a, b, &Matrix::zeros(0, n), tol)?;
    let v = wong.v_star();
    let reach = v.intersect(wong.w_star(), tol);
    let im_b = Subspace::image(b, tol);
    let s1 = reach.map(e, tol).sum(&im_b, tol);
    let s12 = v.map(e, tol).sum(&im_b, tol);

    let t = hcat(&[&reach.echelon(tol), &reach.complement_in(v, tol).echelon(tol), &v.complement().echelon(tol)]);
    let r = hcat(&[&s1.echelon(tol), &s1.complement_in(&s12, tol).echelon(tol), &s12.complement().echelon(tol)]);
    let rows = [s1.dim(), s12.dim() - s1.dim(), m - s12.dim()];
    let cols = [reach.dim(), v.dim() - reach.dim(), n - v.dim()];
    let s = inverse(&r, tol).map_err(|_| Error::cert("Kalman decomposition", "row basis is singular"))?;
    let scale = norm2(e).max(norm2(a)).max(norm2(b)).max(1.0) * norm2(&s).max(1.0) * norm2(&t).max(1.0);
    let mut out = Kalman { e: &s * e * &t, a: &s * a * &t, b: &s * b, s, t, rows, cols };
    certify(&mut out, scale, tol)?;
    Ok(out)
}

fn certify(k: &mut Kalman, scale: f64, tol: &Tolerance) -> Result<()> {
    let fail = |d: String| Error::cert("Kalman decomposition", d);
    let atol = tol.residual_rtol() * scale;
    let ro = offsets(&k.rows);
    let co = offsets(&k.cols);
    for i in 0..3 {
        for j in 0..i {
            for (name, m) in [("E", &mut k.e), ("A", &mut k.a)] {
                let res = max_abs(&block(m, ro[i], co[j], k.rows[i], k.cols[j]));
                if res > atol {
                    return Err(fail(format!("{name} block ({},{}) is {res:.3e}, expected 0", i + 1, j + 1)));
                }
                m.view_mut((ro[i], co[j]), (k.rows[i], k.cols[j])).fill(0.0);
            }
        }
        if i > 0 {
            let res = max_abs(&k.b_block(i));
            if res > atol {
                return Err(fail(format!("B block {} is {res:.3e}, expected 0", i + 1)));
            }
            let l = k.b.ncols();
            k.b.view_mut((ro[i], 0), (k.rows[i], l)).fill(0.0);
        }
    }
    for m in [&mut k.e, &mut k.a, &mut k.b] {
        snap_zeros(m, 1e-14 * scale);
    }
    let (e11, a11, b1) = (k.e_block(0, 0), k.a_block(0, 0), k.b_block(0));
    let sub = wong_limits(&e11, &a11, &b1, &Matrix::zeros(0, k.cols[0]), tol)?;
    if sub.v_star().intersect(sub.w_star(), tol).dim() != k.cols[0] {
        return Err(fail("(1,1) triple is not completely controllable".into()));
    }
    let e22 = k.e_block(1, 1);
    if k.rows[1] != k.cols[1] || numeric_rank(&e22, tol) != k.cols[1] {
        return Err(fail(format!("E_22 ({}x{}) is not invertible", k.rows[1], k.cols[1])));
    }
    let (e33, a33) = (k.e_block(2, 2), k.a_block(2, 2));
    for lam in sample_points() {
        let pen = to_complex(&e33) * lam - to_complex(&a33);
        if numeric_rank_complex(&pen, tol) != k.cols[2] {
            return Err(fail(format!("(3,3) pencil loses column rank at {lam}")));
        }
    }
    Ok(())
}
