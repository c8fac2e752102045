use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{
    block, block_diag, cluster_eigenvalues, condition_number, eigenvalues, hcat, inverse, kron, lstsq, max_abs,
    norm2, numeric_rank, numeric_rank_complex, offsets, sample_points, snap_zeros, to_complex, unvec, vcat,
    Matrix, Subspace, Tolerance,
};
use crate::wong::pencil_wong_limits;

/// Block sizes of a quasi-Kronecker form. The `f` and `sigma` blocks are square.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
pub struct QkfSizes {
    pub m_eps: usize,
    pub n_eps: usize,
    pub n_f: usize,
    pub n_sigma: usize,
    pub m_eta: usize,
    pub n_eta: usize,
}

impl QkfSizes {
    pub fn rows(&self) -> [usize; 4] {
        [self.m_eps, self.n_f, self.n_sigma, self.m_eta]
    }

    pub fn cols(&self) -> [usize; 4] {
        [self.n_eps, self.n_f, self.n_sigma, self.n_eta]
    }
}

#[derive(Debug, Clone, Default)]
pub struct QkfDiagnostics {
    pub cond_p: f64,
    pub cond_q: f64,
    pub max_residual: f64,
    /// Set when the first attempt failed certification and a relaxed tolerance succeeded.
    pub relaxed_retry: Option<String>,
}

/// `P (sE - A) Q = diag(sE_eps - A_eps, sI - J_f, sJ_sigma - I, sE_eta - A_eta)`.
#[derive(Debug, Clone)]
pub struct Qkf {
    pub p: Matrix,
    pub q: Matrix,
    pub q_inv: Matrix,
    pub sizes: QkfSizes,
    pub e_eps: Matrix,
    pub a_eps: Matrix,
    pub j_f: Matrix,
    pub j_sigma: Matrix,
    pub e_eta: Matrix,
    pub a_eta: Matrix,
    pub nilpotency_index: usize,
    pub diagnostics: QkfDiagnostics,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct QkfOptions {
    /// Randomise the completion of every flag basis. Block sizes and the
    /// canonical blocks' invariants do not depend on this choice.
    pub basis_seed: Option<u64>,
}

impl Qkf {
    /// `P m` split into the four row blocks.
    pub fn split_rows(&self, m: &Matrix) -> [Matrix; 4] {
        let pm = &self.p * m;
        let o = offsets(&self.sizes.rows());
        std::array::from_fn(|i| block(&pm, o[i], 0, o[i + 1] - o[i], pm.ncols()))
    }

    /// `m Q` split into the four column blocks.
    pub fn split_cols(&self, m: &Matrix) -> [Matrix; 4] {
        let mq = m * &self.q;
        let o = offsets(&self.sizes.cols());
        std::array::from_fn(|i| block(&mq, 0, o[i], mq.nrows(), o[i + 1] - o[i]))
    }

    /// Coordinates `Q^-1 x` split into the four column blocks.
    pub fn split_coords(&self, x: &DVector<f64>) -> [DVector<f64>; 4] {
        let xi = &self.q_inv * x;
        let o = offsets(&self.sizes.cols());
        std::array::from_fn(|i| xi.rows(o[i], o[i + 1] - o[i]).into_owned())
    }

    /// Column range of block `i` inside `Q`.
    pub fn col_range(&self, i: usize) -> std::ops::Range<usize> {
        let o = offsets(&self.sizes.cols());
        o[i]..o[i + 1]
    }

    pub fn row_range(&self, i: usize) -> std::ops::Range<usize> {
        let o = offsets(&self.sizes.rows());
        o[i]..o[i + 1]
    }

    /// Finite eigenvalues of the pencil, clustered.
    pub fn finite_eigenvalues(&self) -> Vec<Complex64> {
        cluster_eigenvalues(&eigenvalues(&self.j_f), 1e-5)
    }

    /// Block-diagonal `P E Q` and `P A Q` rebuilt from the stored blocks.
    pub fn canonical_pair(&self) -> (Matrix, Matrix) {
        let nf = self.sizes.n_f;
        let ns = self.sizes.n_sigma;
        let e = block_diag(&[&self.e_eps, &Matrix::identity(nf, nf), &self.j_sigma, &self.e_eta]);
        let a = block_diag(&[&self.a_eps, &self.j_f, &Matrix::identity(ns, ns), &self.a_eta]);
        (e, a)
    }
}

pub fn qkf(e: &Matrix, a: &Matrix, tol: &Tolerance) -> Result<Qkf> {
    qkf_with(e, a, tol, QkfOptions::default())
}

/// Quasi-Kronecker triangular form via Wong limits, decoupled by generalised
/// Sylvester equations and certified afterwards. A failed certification is
/// retried once with `rank_rtol * 10`.
pub fn qkf_with(e: &Matrix, a: &Matrix, tol: &Tolerance, opts: QkfOptions) -> Result<Qkf> {
    if e.shape() != a.shape() {
        return Err(Error::shape(format!(
            "pencil matrices differ in shape: {}x{} vs {}x{}",
            e.nrows(),
            e.ncols(),
            a.nrows(),
            a.ncols()
        )));
    }
    match attempt(e, a, tol, opts) {
        Ok(q) => Ok(q),
        Err(Error::Certification { detail: first, .. }) => {
            let relaxed = tol.relaxed(10.0);
            match attempt(e, a, &relaxed, opts) {
                Ok(mut q) => {
                    q.diagnostics.relaxed_retry = Some(first);
                    Ok(q)
                }
                Err(second) => Err(Error::cert(
                    "quasi-Kronecker form",
                    format!("{first}; retry with rank_rtol={:e}: {second}", relaxed.rank_rtol),
                )),
            }
        }
        Err(other) => Err(other),
    }
}

struct Mixer(Option<ChaCha8Rng>);

impl Mixer {
    /// `basis * G + lower * H` with random invertible `G` and random `H`.
    fn mix(&mut self, basis: Matrix, lower: &Matrix) -> Matrix {
        let Some(rng) = self.0.as_mut() else { return basis };
        let k = basis.ncols();
        if k == 0 {
            return basis;
        }
        let g = loop {
            let g = Matrix::from_fn(k, k, |i, j| if i == j { 1.0 } else { 0.0 } + rng.gen_range(-0.5..0.5));
            if condition_number(&g) < 1e3 {
                break g;
            }
        };
        let h = Matrix::from_fn(lower.ncols(), k, |_, _| rng.gen_range(-1.0..1.0));
        basis * g + lower * h
    }
}

fn flag_bases(flags: &[Subspace; 3], ambient: usize, tol: &Tolerance, mixer: &mut Mixer) -> Vec<Matrix> {
    let full = Subspace::full(ambient);
    let levels = [&flags[0], &flags[1], &flags[2], &full];
    let mut out: Vec<Matrix> = Vec::with_capacity(4);
    let mut prev = Subspace::zero(ambient);
    for level in levels {
        let fresh = prev.complement_in(level, tol).echelon(tol);
        let lower = if out.is_empty() {
            Matrix::zeros(ambient, 0)
        } else {
            hcat(&out.iter().collect::<Vec<_>>())
        };
        out.push(mixer.mix(fresh, &lower));
        prev = level.clone();
    }
    out
}

fn attempt(e: &Matrix, a: &Matrix, tol: &Tolerance, opts: QkfOptions) -> Result<Qkf> {
    let (m, n) = e.shape();
    let scale = norm2(e).max(norm2(a)).max(1.0);
    let wong = pencil_wong_limits(e, a, tol)?;
    let v = wong.v_star().clone();
    let w = wong.w_star().clone();
    let vw = v.intersect(&w, tol);
    let v_plus_w = v.sum(&w, tol);
    let col_flags = [vw.clone(), v.clone(), v_plus_w.clone()];
    let e_vw = vw.map(e, tol);
    let e_v = v.map(e, tol);
    let ev_aw = e_v.sum(&w.map(a, tol), tol);
    let row_flags = [e_vw.clone(), e_v.clone(), ev_aw.clone()];

    let sizes = QkfSizes {
        m_eps: e_vw.dim(),
        n_eps: vw.dim(),
        n_f: v.dim() - vw.dim(),
        n_sigma: v_plus_w.dim() - v.dim(),
        m_eta: m - ev_aw.dim(),
        n_eta: n - v_plus_w.dim(),
    };
    let m_f = e_v.dim() - e_vw.dim();
    let m_sigma = ev_aw.dim() - e_v.dim();
    if m_f != sizes.n_f || m_sigma != sizes.n_sigma {
        return Err(Error::cert(
            "quasi-Kronecker form",
            format!(
                "regular blocks are not square: f {}x{}, sigma {}x{}",
                m_f, sizes.n_f, m_sigma, sizes.n_sigma
            ),
        ));
    }
    if (sizes.n_eps > 0 && sizes.m_eps >= sizes.n_eps) || (sizes.n_eps == 0 && sizes.m_eps > 0) {
        return Err(Error::cert("quasi-Kronecker form", format!("epsilon block is {}x{}", sizes.m_eps, sizes.n_eps)));
    }
    if (sizes.m_eta > 0 && sizes.n_eta >= sizes.m_eta) || (sizes.m_eta == 0 && sizes.n_eta > 0) {
        return Err(Error::cert("quasi-Kronecker form", format!("eta block is {}x{}", sizes.m_eta, sizes.n_eta)));
    }

    let mut mixer = Mixer(opts.basis_seed.map(ChaCha8Rng::seed_from_u64));
    let t = hcat(&flag_bases(&col_flags, n, tol, &mut mixer).iter().collect::<Vec<_>>());
    let r = hcat(&flag_bases(&row_flags, m, tol, &mut mixer).iter().collect::<Vec<_>>());
    let mut p = inverse(&r, tol).map_err(|_| Error::cert("quasi-Kronecker form", "row flag basis is singular"))?;
    let mut q = t;
    let mut me = &p * e * &q;
    let mut ma = &p * a * &q;

    let ro = offsets(&sizes.rows());
    let co = offsets(&sizes.cols());
    let rtol = tol.residual_rtol() * scale * (1.0 + condition_number(&p)).min(1e6);
    for i in 0..4 {
        for j in 0..i {
            let rows = ro[i + 1] - ro[i];
            let cols = co[j + 1] - co[j];
            let res = max_abs(&block(&me, ro[i], co[j], rows, cols)).max(max_abs(&block(&ma, ro[i], co[j], rows, cols)));
            if res > rtol {
                return Err(Error::cert(
                    "quasi-Kronecker form",
                    format!("triangular form violated in block ({i},{j}) by {res:.3e}"),
                ));
            }
            me.view_mut((ro[i], co[j]), (rows, cols)).fill(0.0);
            ma.view_mut((ro[i], co[j]), (rows, cols)).fill(0.0);
        }
    }

    for j in 1..4 {
        for i in (0..j).rev() {
            let (ri, rj, ci, cj) = (ro[i + 1] - ro[i], ro[j + 1] - ro[j], co[i + 1] - co[i], co[j + 1] - co[j]);
            if ri == 0 || cj == 0 {
                continue;
            }
            let (x, y) = solve_coupling(
                &block(&me, ro[i], co[i], ri, ci),
                &block(&ma, ro[i], co[i], ri, ci),
                &block(&me, ro[j], co[j], rj, cj),
                &block(&ma, ro[j], co[j], rj, cj),
                &block(&me, ro[i], co[j], ri, cj),
                &block(&ma, ro[i], co[j], ri, cj),
                tol,
                rtol,
            )?;
            for mat in [&mut me, &mut ma, &mut p] {
                let add = &x * mat.rows(ro[j], rj);
                let mut target = mat.rows_mut(ro[i], ri);
                target += add;
            }
            for mat in [&mut me, &mut ma, &mut q] {
                let add = mat.columns(co[i], ci) * &y;
                let mut target = mat.columns_mut(co[j], cj);
                target += add;
            }
            me.view_mut((ro[i], co[j]), (ri, cj)).fill(0.0);
            ma.view_mut((ro[i], co[j]), (ri, cj)).fill(0.0);
        }
    }

    let nf = sizes.n_f;
    let e_ff = block(&me, ro[1], co[1], nf, nf);
    let e_ff_inv = inverse(&e_ff, tol).map_err(|_| Error::cert("quasi-Kronecker form", "E_f is singular"))?;
    let ns = sizes.n_sigma;
    let a_ss = block(&ma, ro[2], co[2], ns, ns);
    let a_ss_inv = inverse(&a_ss, tol).map_err(|_| Error::cert("quasi-Kronecker form", "A_sigma is singular"))?;
    for (start, len, f) in [(ro[1], nf, &e_ff_inv), (ro[2], ns, &a_ss_inv)] {
        for mat in [&mut me, &mut ma, &mut p] {
            let scaled = f * mat.rows(start, len);
            mat.rows_mut(start, len).copy_from(&scaled);
        }
    }

    let snap = 1e-14 * scale;
    let grab = |mat: &Matrix, i: usize| {
        let mut b = block(mat, ro[i], co[i], ro[i + 1] - ro[i], co[i + 1] - co[i]);
        snap_zeros(&mut b, snap);
        b
    };
    let e_eps = grab(&me, 0);
    let a_eps = grab(&ma, 0);
    let j_f = grab(&ma, 1);
    let j_sigma = grab(&me, 2);
    let e_eta = grab(&me, 3);
    let a_eta = grab(&ma, 3);
    let q_inv = inverse(&q, tol).map_err(|_| Error::cert("quasi-Kronecker form", "Q is singular"))?;

    let mut out = Qkf {
        diagnostics: QkfDiagnostics { cond_p: condition_number(&p), cond_q: condition_number(&q), ..Default::default() },
        p,
        q,
        q_inv,
        sizes,
        e_eps,
        a_eps,
        j_f,
        j_sigma,
        e_eta,
        a_eta,
        nilpotency_index: 0,
    };
    certify(&mut out, e, a, tol)?;
    Ok(out)
}

/// Solve `E_ij + X E_jj + E_ii Y = 0`, `A_ij + X A_jj + A_ii Y = 0`.
#[allow(clippy::too_many_arguments)]
fn solve_coupling(
    e_ii: &Matrix,
    a_ii: &Matrix,
    e_jj: &Matrix,
    a_jj: &Matrix,
    e_ij: &Matrix,
    a_ij: &Matrix,
    tol: &Tolerance,
    rtol: f64,
) -> Result<(Matrix, Matrix)> {
    let (mi, ni) = e_ii.shape();
    let (mj, nj) = e_jj.shape();
    let id_mi = Matrix::identity(mi, mi);
    let id_nj = Matrix::identity(nj, nj);
    let g = vcat(&[
        &hcat(&[&kron(&e_jj.transpose(), &id_mi), &kron(&id_nj, e_ii)]),
        &hcat(&[&kron(&a_jj.transpose(), &id_mi), &kron(&id_nj, a_ii)]),
    ]);
    let rhs = -DVector::from_iterator(2 * mi * nj, e_ij.iter().chain(a_ij.iter()).copied());
    let sol = lstsq(&g, &rhs, tol);
    let res = (&g * &sol - &rhs).amax();
    if res > rtol {
        return Err(Error::cert("quasi-Kronecker form", format!("generalised Sylvester residual {res:.3e}")));
    }
    let x = unvec(&sol.as_slice()[..mi * mj], mi, mj);
    let y = unvec(&sol.as_slice()[mi * mj..], ni, nj);
    Ok((x, y))
}

fn certify(k: &mut Qkf, e: &Matrix, a: &Matrix, tol: &Tolerance) -> Result<()> {
    let fail = |d: String| Error::cert("quasi-Kronecker form", d);
    let s = k.sizes;
    let (ce, ca) = k.canonical_pair();
    let pe = &k.p * e * &k.q;
    let pa = &k.p * a * &k.q;
    let scale = (norm2(&k.p) * norm2(e).max(norm2(a)) * norm2(&k.q)).max(1.0);
    let mut worst = 0.0_f64;
    for lam in sample_points() {
        let lhs = to_complex(&pe) * lam - to_complex(&pa);
        let rhs = to_complex(&ce) * lam - to_complex(&ca);
        worst = worst.max((lhs - rhs).iter().fold(0.0, |acc: f64, z| acc.max(z.norm())));
    }
    k.diagnostics.max_residual = worst / scale;
    if worst > tol.residual_rtol() * scale {
        return Err(fail(format!("block-diagonal residual {:.3e}", worst / scale)));
    }
    if numeric_rank(&k.e_eps, tol) != s.m_eps {
        return Err(fail("E_eps lacks full row rank".into()));
    }
    if numeric_rank(&k.e_eta, tol) != s.n_eta {
        return Err(fail("E_eta lacks full column rank".into()));
    }
    for lam in sample_points() {
        let pen = to_complex(&k.e_eps) * lam - to_complex(&k.a_eps);
        if numeric_rank_complex(&pen, tol) != s.m_eps {
            return Err(fail(format!("epsilon pencil loses row rank at {lam}")));
        }
        let pen = to_complex(&k.e_eta) * lam - to_complex(&k.a_eta);
        if numeric_rank_complex(&pen, tol) != s.n_eta {
            return Err(fail(format!("eta pencil loses column rank at {lam}")));
        }
    }
    let ns = s.n_sigma;
    let jn = norm2(&k.j_sigma).max(1.0);
    let mut power = Matrix::identity(ns, ns);
    let mut index = 0;
    if ns > 0 {
        loop {
            power = &power * &k.j_sigma;
            index += 1;
            if max_abs(&power) <= tol.residual_rtol() * jn.powi(index as i32) {
                break;
            }
            if index >= ns {
                return Err(fail(format!("J_sigma is not nilpotent (|J^{ns}| = {:.3e})", max_abs(&power))));
            }
        }
    }
    k.nilpotency_index = index;
    Ok(())
}

/// Finite eigenvalues of `sE - A`.
pub fn pencil_finite_eigenvalues(e: &Matrix, a: &Matrix, tol: &Tolerance) -> Result<Vec<Complex64>> {
    Ok(qkf(e, a, tol)?.finite_eigenvalues())
}
