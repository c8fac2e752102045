use crate::error::{Error, Result};
use crate::linalg::{block, hcat, max_abs, norm2, numeric_rank, rank_scaled, snap_zeros, Matrix, Subspace, Tolerance};

const SNAP_RTOL: f64 = 1e-13;

/// One removed stage: `rows` trailing rows whose `E` and `B` parts vanish and whose
/// `A` part has full column rank on the `cols` trailing columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct StaircaseStage {
    pub rows: usize,
    pub cols: usize,
}

/// Orthogonal `U_O`, `V_O` reducing `(E, A, B)` to a staircase whose leading block
/// `(E_O, A_O, B_O)` has `[E_O, B_O]` of full row rank.
#[derive(Debug, Clone)]
pub struct Staircase {
    pub u: Matrix,
    pub v: Matrix,
    /// Stages in discovery order (stage 1 sits bottom-right).
    pub stages: Vec<StaircaseStage>,
    pub m_o: usize,
    pub n_o: usize,
    pub e_o: Matrix,
    pub a_o: Matrix,
    pub b_o: Matrix,
}

impl Staircase {
    /// Number of staircase levels `k`, counting the retained block.
    pub fn depth(&self) -> usize {
        self.stages.len() + 1
    }

    /// Leading `n_O` columns of `m V_O`.
    pub fn reduce_cols(&self, m: &Matrix) -> Matrix {
        let mv = m * &self.v;
        block(&mv, 0, 0, mv.nrows(), self.n_o)
    }

    /// Embedding of the retained coordinates into the original state space.
    pub fn embedding(&self) -> Matrix {
        block(&self.v, 0, 0, self.v.nrows(), self.n_o)
    }
}

pub fn staircase(e: &Matrix, a: &Matrix, b: &Matrix, tol: &Tolerance) -> Result<Staircase> {
    let (m, n) = e.shape();
    if a.shape() != (m, n) || b.nrows() != m {
        return Err(Error::shape("staircase expects E, A of equal shape and B with matching rows"));
    }
    let l = b.ncols();
    let scale_eb = norm2(&hcat(&[e, b]));
    let scale_a = norm2(a);
    let mut u = Matrix::identity(m, m);
    let mut v = Matrix::identity(n, n);
    let mut ue = e.clone();
    let mut ua = a.clone();
    let mut ub = b.clone();
    let (mut rows, mut cols) = (m, n);
    let mut stages = Vec::new();
    loop {
        let eb = hcat(&[&block(&ue, 0, 0, rows, cols), &block(&ub, 0, 0, rows, l)]);
        let image = Subspace::image_scaled(&eb, scale_eb, tol);
        let r = image.dim();
        if r == rows {
            break;
        }
        let left = hcat(&[image.basis(), image.complement().basis()]).transpose();
        for mat in [&mut ue, &mut ua, &mut ub, &mut u] {
            let w = mat.ncols();
            let rotated = &left * block(mat, 0, 0, rows, w);
            mat.view_mut((0, 0), (rows, w)).copy_from(&rotated);
        }
        let a_bottom = block(&ua, r, 0, rows - r, cols);
        let row_space = Subspace::image_scaled(&a_bottom.transpose(), scale_a, tol);
        let rho = row_space.dim();
        let right = hcat(&[row_space.complement().basis(), row_space.basis()]);
        for mat in [&mut ue, &mut ua] {
            let h = mat.nrows();
            let rotated = block(mat, 0, 0, h, cols) * &right;
            mat.view_mut((0, 0), (h, cols)).copy_from(&rotated);
        }
        let rotated = block(&v, 0, 0, n, cols) * &right;
        v.view_mut((0, 0), (n, cols)).copy_from(&rotated);
        ue.view_mut((r, 0), (rows - r, cols)).fill(0.0);
        ub.view_mut((r, 0), (rows - r, l)).fill(0.0);
        ua.view_mut((r, 0), (rows - r, cols - rho)).fill(0.0);
        stages.push(StaircaseStage { rows: rows - r, cols: rho });
        rows = r;
        cols -= rho;
    }
    let floor = SNAP_RTOL * scale_eb.max(scale_a).max(1.0);
    for mat in [&mut ue, &mut ua, &mut ub] {
        snap_zeros(mat, floor);
    }
    let out = Staircase {
        e_o: block(&ue, 0, 0, rows, cols),
        a_o: block(&ua, 0, 0, rows, cols),
        b_o: block(&ub, 0, 0, rows, l),
        m_o: rows,
        n_o: cols,
        u,
        v,
        stages,
    };
    certify(&out, e, a, b, tol)?;
    Ok(out)
}

fn certify(s: &Staircase, e: &Matrix, a: &Matrix, b: &Matrix, tol: &Tolerance) -> Result<()> {
    let fail = |d: String| Error::cert("staircase", d);
    let ue = &s.u * e * &s.v;
    let ua = &s.u * a * &s.v;
    let ub = &s.u * b;
    let scale = norm2(e).max(norm2(a)).max(norm2(b)).max(1.0);
    let atol = tol.residual_rtol() * scale;
    let n = e.ncols();
    let l = b.ncols();
    for (name, q) in [("U_O", &s.u), ("V_O", &s.v)] {
        let k = q.nrows();
        let dev = max_abs(&(q.transpose() * q - Matrix::identity(k, k)));
        if dev > 1e-10 {
            return Err(fail(format!("{name} is not orthogonal ({dev:.3e})")));
        }
    }
    let (mut rows, mut cols) = (e.nrows(), n);
    for (i, st) in s.stages.iter().enumerate() {
        let r0 = rows - st.rows;
        let c_null = cols - st.cols;
        let z = max_abs(&block(&ue, r0, 0, st.rows, cols))
            .max(max_abs(&block(&ub, r0, 0, st.rows, l)))
            .max(max_abs(&block(&ua, r0, 0, st.rows, c_null)));
        if z > atol {
            return Err(fail(format!("stage {} zero pattern violated by {z:.3e}", i + 1)));
        }
        let a_i = block(&ua, r0, c_null, st.rows, st.cols);
        if numeric_rank(&a_i, tol) != st.cols {
            return Err(fail(format!("A_{} lacks full column rank", i + 1)));
        }
        let upper = hcat(&[&block(&ue, 0, 0, r0, cols), &block(&ub, 0, 0, r0, l)]);
        if rank_scaled(&upper, norm2(&hcat(&[e, b])), tol) != r0 {
            return Err(fail(format!("[E, B] above stage {} lacks full row rank", i + 1)));
        }
        rows = r0;
        cols = c_null;
    }
    if rows != s.m_o || cols != s.n_o {
        return Err(fail("stage bookkeeping mismatch".into()));
    }
    Ok(())
}
