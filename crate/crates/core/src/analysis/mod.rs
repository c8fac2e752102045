//! System model and the algebraic tests for partial detectability, partial
//! causality and partial causal detectability.

mod predicates;
pub mod toeplitz;

pub use predicates::{
    analyze, causal_detectability_ranks, characterization_suite, detectability_ranks_at, is_partially_causal, is_partially_detectable,
    is_partially_impulse_observable, k_vanishes_on_qkf, qkf_rank_condition, pencil_impulse_observable,
    CausalityEvidence, DetectabilityEvidence, LambdaRank, RankPair,
};
pub use toeplitz::{build_f, build_f_k};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{hcat, vcat, Matrix, Tolerance};

/// Dimensions of `E (m x n)`, `B (m x l)`, `C (p x n)`, `K (r x n)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub m: usize,
    pub n: usize,
    pub l: usize,
    pub p: usize,
    pub r: usize,
}

/// `E x' = A x + B u`, `y = C x + D u`, `z = K x`.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorSystem {
    pub e: Matrix,
    pub a: Matrix,
    pub b: Matrix,
    pub c: Matrix,
    pub d: Matrix,
    pub k: Matrix,
}

impl DescriptorSystem {
    pub fn new(e: Matrix, a: Matrix, b: Matrix, c: Matrix, d: Matrix, k: Matrix) -> Result<Self> {
        let (m, n) = e.shape();
        if n == 0 {
            return Err(Error::shape("the state dimension n must be positive"));
        }
        let check = |name: &str, mat: &Matrix, rows: Option<usize>, cols: Option<usize>| -> Result<()> {
            if let Some(r) = rows {
                if mat.nrows() != r {
                    return Err(Error::shape(format!(
                        "{name} is {}x{} but must have {r} rows",
                        mat.nrows(),
                        mat.ncols()
                    )));
                }
            }
            if let Some(c) = cols {
                if mat.ncols() != c {
                    return Err(Error::shape(format!(
                        "{name} is {}x{} but must have {c} columns",
                        mat.nrows(),
                        mat.ncols()
                    )));
                }
            }
            Ok(())
        };
        check("A", &a, Some(m), Some(n))?;
        check("B", &b, Some(m), None)?;
        check("C", &c, None, Some(n))?;
        check("D", &d, Some(c.nrows()), Some(b.ncols()))?;
        check("K", &k, None, Some(n))?;
        if k.nrows() > n {
            return Err(Error::shape(format!("K has {} rows, more than n = {n}", k.nrows())));
        }
        for (name, mat) in [("E", &e), ("A", &a), ("B", &b), ("C", &c), ("D", &d), ("K", &k)] {
            if let Some(i) = mat.iter().position(|x| !x.is_finite()) {
                let rows = mat.nrows().max(1);
                return Err(Error::NonFinite { name: name.into(), row: i % rows, col: i / rows });
            }
        }
        Ok(DescriptorSystem { e, a, b, c, d, k })
    }

    pub fn dims(&self) -> Dims {
        Dims { m: self.e.nrows(), n: self.e.ncols(), l: self.b.ncols(), p: self.c.nrows(), r: self.k.nrows() }
    }

    /// `E_bar = [E; 0]`, `A_bar = [A; C]`, `B_bar = [[B, 0], [D, -I]]`: the system
    /// seen as a pencil in `x` driven by `[u; y]`.
    pub fn stacked(&self) -> Stacked {
        let Dims { m, n, l, p, .. } = self.dims();
        let e_bar = vcat(&[&self.e, &Matrix::zeros(p, n)]);
        let a_bar = vcat(&[&self.a, &self.c]);
        let b_bar = vcat(&[
            &hcat(&[&self.b, &Matrix::zeros(m, p)]),
            &hcat(&[&self.d, &-Matrix::identity(p, p)]),
        ]);
        debug_assert_eq!(b_bar.ncols(), l + p);
        Stacked { e: e_bar, a: a_bar, b: b_bar }
    }

    /// Same plant with a different functional `K`.
    pub fn with_k(&self, k: Matrix) -> Result<Self> {
        DescriptorSystem::new(self.e.clone(), self.a.clone(), self.b.clone(), self.c.clone(), self.d.clone(), k)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stacked {
    pub e: Matrix,
    pub a: Matrix,
    pub b: Matrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisDiagnostics {
    pub tolerance: Tolerance,
    pub stacked_qkf_sizes: crate::decomp::QkfSizes,
    pub cond_p: f64,
    pub cond_q: f64,
    /// Finite eigenvalues of the stacked pencil as `[re, im]`.
    pub finite_eigenvalues: Vec<[f64; 2]>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub dims: Dims,
    pub partially_impulse_observable: bool,
    pub partially_detectable: DetectabilityEvidence,
    pub partially_causal: CausalityEvidence,
    pub causal_detectability_ranks: RankPair,
    pub characterization_votes: [bool; 5],
    pub votes_agree: bool,
    pub partially_causal_detectable: bool,
    pub diagnostics: AnalysisDiagnostics,
}
