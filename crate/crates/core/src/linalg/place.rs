use super::{eigenvalues, hcat, inverse, kron, unvec, vec_of, Matrix, Subspace, Tolerance};
use crate::error::{Error, Result};

/// Output injection `L` with `sigma(a1 - L a2)` strictly left of `-margin`.
///
/// Works on the dual pair `(a1^T, a2^T)` with the Bass algorithm: the Lyapunov
/// solution of the shifted dual gives a gain that places the spectrum left of the
/// shift. Unobservable modes are split off first and checked.
pub fn place_poles(a1: &Matrix, a2: &Matrix, margin: f64, tol: &Tolerance) -> Result<Matrix> {
    let s = a1.nrows();
    if a1.ncols() != s || a2.ncols() != s {
        return Err(Error::shape(format!(
            "place_poles expects square A1 and A2 with {s} columns, got {}x{} and {}x{}",
            a1.nrows(),
            a1.ncols(),
            a2.nrows(),
            a2.ncols()
        )));
    }
    let q = a2.nrows();
    if max_re(a1) < -margin {
        return Ok(Matrix::zeros(s, q));
    }
    let l = observable_gain(a1, a2, margin, tol)?;
    let closed = a1 - &l * a2;
    let worst = max_re(&closed);
    if worst >= -margin {
        return Err(Error::Numerical(format!("placed spectrum reaches Re = {worst:.3e}")));
    }
    Ok(l)
}

fn max_re(m: &Matrix) -> f64 {
    eigenvalues(m).iter().map(|e| e.re).fold(f64::NEG_INFINITY, f64::max)
}

fn observable_gain(a1: &Matrix, a2: &Matrix, margin: f64, tol: &Tolerance) -> Result<Matrix> {
    let s = a1.nrows();
    let mut obs = Matrix::zeros(0, s);
    let mut block = a2.clone();
    for _ in 0..s {
        obs = super::vcat(&[&obs, &block]);
        block = &block * a1;
    }
    let unobs = Subspace::kernel(&obs, tol);
    if unobs.is_zero() {
        return bass(a1, a2, margin, tol);
    }
    let t_u = unobs.basis().clone();
    let t_o = unobs.complement().basis().clone();
    let t = hcat(&[&t_o, &t_u]);
    let t_inv = t.transpose();
    let a = &t_inv * a1 * &t;
    let c = a2 * &t;
    let no = t_o.ncols();
    let a_uu = a.view((no, no), (s - no, s - no)).into_owned();
    if let Some(bad) = eigenvalues(&a_uu).into_iter().find(|e| e.re >= -margin) {
        return Err(Error::DetectabilityViolated { re: bad.re, im: bad.im, margin });
    }
    if no == 0 {
        return Ok(Matrix::zeros(s, a2.nrows()));
    }
    let a_oo = a.view((0, 0), (no, no)).into_owned();
    let c_o = c.view((0, 0), (c.nrows(), no)).into_owned();
    let l_o = bass(&a_oo, &c_o, margin, tol)?;
    let mut l_t = Matrix::zeros(s, a2.nrows());
    l_t.view_mut((0, 0), (no, a2.nrows())).copy_from(&l_o);
    Ok(t * l_t)
}

fn bass(a1: &Matrix, a2: &Matrix, margin: f64, tol: &Tolerance) -> Result<Matrix> {
    let s = a1.nrows();
    let a = a1.transpose();
    let b = a2.transpose();
    let min_re = eigenvalues(&a).iter().map(|e| e.re).fold(f64::INFINITY, f64::min);
    let beta = margin.max(-min_re) + 1.0;
    let f = &a + Matrix::identity(s, s) * beta;
    let id = Matrix::identity(s, s);
    let lyap = kron(&id, &f) + kron(&f, &id);
    let rhs = vec_of(&(&b * b.transpose()));
    let p = lyap
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Numerical("Lyapunov system is singular".into()))?;
    let p = unvec(p.as_slice(), s, s);
    let p = (&p + p.transpose()) * 0.5;
    let p_inv = inverse(&p, tol).map_err(|_| Error::Numerical("controllability Gramian is singular".into()))?;
    let l_t = b.transpose() * p_inv;
    Ok(l_t.transpose())
}
