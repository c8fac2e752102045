//! Augmented Wong sequences of a quadruple `[E, A, B, C]`.
//!
//! `V^0 = ker C`, `V^{i+1} = A^-1(E V^i + im B) ∩ ker C` decreases to `V*`;
//! `W^0 = {0}`, `W^{i+1} = E^-1(A W^i + im B) ∩ ker C` increases to `W*`.

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Subspace, Tolerance};

#[derive(Debug, Clone)]
pub struct WongLimits {
    /// `V^0, V^1, ...` up to and including the limit.
    pub v_chain: Vec<Subspace>,
    /// `W^0, W^1, ...` up to and including the limit.
    pub w_chain: Vec<Subspace>,
}

impl WongLimits {
    pub fn v_star(&self) -> &Subspace {
        self.v_chain.last().expect("chain is never empty")
    }

    pub fn w_star(&self) -> &Subspace {
        self.w_chain.last().expect("chain is never empty")
    }

    /// `V^i`, saturating at the limit.
    pub fn v_at(&self, i: usize) -> &Subspace {
        &self.v_chain[i.min(self.v_chain.len() - 1)]
    }

    pub fn w_at(&self, i: usize) -> &Subspace {
        &self.w_chain[i.min(self.w_chain.len() - 1)]
    }
}

fn check_shapes(e: &Matrix, a: &Matrix, b: &Matrix, c: &Matrix) -> Result<()> {
    let (m, n) = e.shape();
    if a.shape() != (m, n) {
        return Err(Error::shape(format!("E is {m}x{n} but A is {}x{}", a.nrows(), a.ncols())));
    }
    if b.nrows() != m {
        return Err(Error::shape(format!("B has {} rows, expected {m}", b.nrows())));
    }
    if c.ncols() != n {
        return Err(Error::shape(format!("C has {} columns, expected {n}", c.ncols())));
    }
    Ok(())
}

/// Both Wong sequences to their limits.
pub fn wong_limits(e: &Matrix, a: &Matrix, b: &Matrix, c: &Matrix, tol: &Tolerance) -> Result<WongLimits> {
    check_shapes(e, a, b, c)?;
    let n = e.ncols();
    let ker_c = Subspace::kernel(c, tol);
    let im_b = Subspace::image(b, tol);

    let mut v_chain = vec![ker_c.clone()];
    loop {
        let cur = v_chain.last().unwrap();
        let next = Subspace::preimage(a, &cur.map(e, tol).sum(&im_b, tol), tol).intersect(&ker_c, tol);
        if next.dim() == cur.dim() && cur.contains(&next, tol) {
            break;
        }
        if next.dim() > cur.dim() || v_chain.len() > n + 1 {
            return Err(Error::Numerical("V sequence failed to decrease monotonically".into()));
        }
        v_chain.push(next);
    }

    let mut w_chain = vec![Subspace::zero(n)];
    loop {
        let cur = w_chain.last().unwrap();
        let next = Subspace::preimage(e, &cur.map(a, tol).sum(&im_b, tol), tol).intersect(&ker_c, tol);
        if next.dim() == cur.dim() && next.contains(cur, tol) {
            break;
        }
        if next.dim() < cur.dim() || w_chain.len() > n + 1 {
            return Err(Error::Numerical("W sequence failed to increase monotonically".into()));
        }
        w_chain.push(next);
    }
    Ok(WongLimits { v_chain, w_chain })
}

/// Wong limits of the bare pencil `(E, A)`.
pub fn pencil_wong_limits(e: &Matrix, a: &Matrix, tol: &Tolerance) -> Result<WongLimits> {
    let (m, n) = e.shape();
    wong_limits(e, a, &Matrix::zeros(m, 0), &Matrix::zeros(0, n), tol)
}
