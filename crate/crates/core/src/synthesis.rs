//! Functional estimator synthesis
//! `w' = N w + H [u; y]`, `z_hat = R w + M [u; y]` with `z_hat - K x -> 0`.

use serde::{Deserialize, Serialize};

use crate::analysis::{analyze, AnalysisReport, DescriptorSystem};
use crate::decomp::{qkf, staircase, Qkf, QkfSizes, Staircase};
use crate::error::{Error, Result};
use crate::linalg::{
    block, block_diag, eigenvalues, hcat, inverse, max_abs, norm2, pinv, place_poles, spectral_split, vcat, Matrix,
    Subspace, Tolerance,
};

/// Realisation `(N, H, R, M)` of a functional estimator of order `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimator {
    pub n: Matrix,
    pub h: Matrix,
    pub r: Matrix,
    pub m: Matrix,
}

impl Estimator {
    pub fn new(n: Matrix, h: Matrix, r: Matrix, m: Matrix) -> Result<Self> {
        let s = n.nrows();
        if n.ncols() != s {
            return Err(Error::shape(format!("N is {}x{}, expected square", s, n.ncols())));
        }
        if h.nrows() != s {
            return Err(Error::shape(format!("H has {} rows, expected {s}", h.nrows())));
        }
        if r.ncols() != s {
            return Err(Error::shape(format!("R has {} columns, expected {s}", r.ncols())));
        }
        if m.nrows() != r.nrows() || m.ncols() != h.ncols() {
            return Err(Error::shape(format!(
                "M is {}x{}, expected {}x{}",
                m.nrows(),
                m.ncols(),
                r.nrows(),
                h.ncols()
            )));
        }
        for (name, mat) in [("N", &n), ("H", &h), ("R", &r), ("M", &m)] {
            if let Some(i) = mat.iter().position(|x| !x.is_finite()) {
                let rows = mat.nrows().max(1);
                return Err(Error::NonFinite { name: name.into(), row: i % rows, col: i / rows });
            }
        }
        Ok(Estimator { n, h, r, m })
    }

    pub fn order(&self) -> usize {
        self.n.nrows()
    }

    pub fn inputs(&self) -> usize {
        self.h.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.r.nrows()
    }

    /// Largest real part of the spectrum of `N` (negative infinity when `s = 0`).
    pub fn spectral_abscissa(&self) -> f64 {
        eigenvalues(&self.n).iter().map(|e| e.re).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn check_compatible(&self, sys: &DescriptorSystem) -> Result<()> {
        let d = sys.dims();
        if self.inputs() != d.l + d.p || self.outputs() != d.r {
            return Err(Error::shape(format!(
                "estimator takes {} inputs and gives {} outputs; system needs {} and {}",
                self.inputs(),
                self.outputs(),
                d.l + d.p,
                d.r
            )));
        }
        Ok(())
    }
}

/// Intermediate artefacts of every construction step.
#[derive(Debug, Clone)]
pub struct SynthesisTrace {
    pub analysis: AnalysisReport,
    pub staircase: Staircase,
    pub stacked_qkf: Qkf,
    pub k_eps: Matrix,
    pub k_f: Matrix,
    pub k_sigma: Matrix,
    pub k_eta: Matrix,
    pub b_f: Matrix,
    pub b_sigma: Matrix,
    pub b_eta: Matrix,
    pub u1: Matrix,
    pub j_f1: Matrix,
    pub j_f2: Matrix,
    pub b_f1: Matrix,
    pub b_f2: Matrix,
    pub k_f1: Matrix,
    pub k_f2: Matrix,
    pub u2: Matrix,
    pub a_eta1: Matrix,
    pub a_eta2: Matrix,
    pub b_eta1: Matrix,
    pub b_eta2: Matrix,
    /// Output-injection gain; `None` when the eta coordinates were resolved algebraically.
    pub gain: Option<Matrix>,
    pub eta_folded: bool,
    /// `w - state_map x` obeys `e1' = N e1` along every plant trajectory.
    pub state_map: Matrix,
}

/// Serializable digest of a trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub staircase_depth: usize,
    pub reduced_states: usize,
    pub qkf_sizes: QkfSizes,
    pub nilpotency_index: usize,
    pub unstable_modes: usize,
    pub stable_modes: usize,
    pub eta_folded: bool,
    pub gain: Option<Vec<Vec<f64>>>,
    pub estimator_eigenvalues: Vec<[f64; 2]>,
    pub state_map: Vec<Vec<f64>>,
}

pub(crate) fn rows_of(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

impl SynthesisTrace {
    pub fn summary(&self, est: &Estimator) -> TraceSummary {
        TraceSummary {
            staircase_depth: self.staircase.depth(),
            reduced_states: self.staircase.n_o,
            qkf_sizes: self.stacked_qkf.sizes,
            nilpotency_index: self.stacked_qkf.nilpotency_index,
            unstable_modes: self.j_f1.nrows(),
            stable_modes: self.j_f2.nrows(),
            eta_folded: self.eta_folded,
            gain: self.gain.as_ref().map(rows_of),
            estimator_eigenvalues: eigenvalues(&est.n).iter().map(|z| [z.re, z.im]).collect(),
            state_map: rows_of(&self.state_map),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Synthesis {
    pub estimator: Estimator,
    pub trace: SynthesisTrace,
}

fn vanishes(m: &Matrix, scale: f64, tol: &Tolerance) -> bool {
    max_abs(m) <= tol.subspace_atol() * scale.max(1.0)
}

/// Build an estimator for a partially causal detectable system.
pub fn synthesize(sys: &DescriptorSystem, tol: &Tolerance) -> Result<Synthesis> {
    let report = analyze(sys, tol)?;
    if !report.partially_detectable.holds {
        let bad = report.partially_detectable.tested.iter().find(|t| !t.ranks.equal());
        let at = bad.map_or(String::new(), |t| {
            format!(" at lambda = {:.6}{:+.6}i (ranks {} vs {})", t.re, t.im, t.ranks.without_k, t.ranks.with_k)
        });
        return Err(Error::Precondition(format!("partial detectability rank condition fails{at}")));
    }
    if !report.partially_causal_detectable {
        let r = report.causal_detectability_ranks;
        return Err(Error::Precondition(format!(
            "causal detectability rank condition fails: rank without K = {}, with K = {} (votes {:?})",
            r.without_k, r.with_k, report.characterization_votes
        )));
    }
    build(sys, report, tol)
}

fn build(sys: &DescriptorSystem, analysis: AnalysisReport, tol: &Tolerance) -> Result<Synthesis> {
    let d = sys.dims();
    let (p, l) = (d.p, d.l);

    // reduce to [E_O, B_O] of full row rank
    let sc = staircase(&sys.e, &sys.a, &sys.b, tol)?;
    let c_o = sc.reduce_cols(&sys.c);
    let k_o = sc.reduce_cols(&sys.k);
    let n_o = sc.n_o;

    // stacked pencil in x_O driven by [u; y]
    let e_bar = vcat(&[&sc.e_o, &Matrix::zeros(p, n_o)]);
    let a_bar = vcat(&[&sc.a_o, &c_o]);
    let b_bar = vcat(&[
        &hcat(&[&sc.b_o, &Matrix::zeros(sc.m_o, p)]),
        &hcat(&[&sys.d, &-Matrix::identity(p, p)]),
    ]);
    let q = qkf(&e_bar, &a_bar, tol)?;
    let [_, b_f, b_sigma, b_eta] = q.split_rows(&b_bar);
    let [k_eps, k_f, k_sigma, k_eta] = q.split_cols(&k_o);
    let kscale = norm2(&sys.k) * norm2(&q.q).max(1.0);
    if !vanishes(&k_eps, kscale, tol) {
        return Err(Error::Internal(format!("K_eps = {:.3e} should vanish", max_abs(&k_eps))));
    }
    if !vanishes(&(&k_sigma * &q.j_sigma), kscale * norm2(&q.j_sigma), tol) {
        return Err(Error::Internal("K_sigma J_sigma should vanish".into()));
    }

    // unstable / stable split of the finite dynamics
    let split = spectral_split(&q.j_f, tol.eig_stability_margin, tol)?;
    let nf1 = split.plus.nrows();
    let nf2 = split.minus.nrows();
    let bf = &split.t_inv * &b_f;
    let b_f1 = block(&bf, 0, 0, nf1, l + p);
    let b_f2 = block(&bf, nf1, 0, nf2, l + p);
    let kf = &k_f * &split.t;
    let k_f1 = block(&kf, 0, 0, d.r, nf1);
    let k_f2 = block(&kf, 0, nf1, d.r, nf2);
    if !vanishes(&k_f1, kscale * norm2(&split.t), tol) {
        return Err(Error::Internal(format!("K_f1 = {:.3e} should vanish", max_abs(&k_f1))));
    }

    // eta block in the form E_eta -> [I; 0]
    let (u2, n_eta) = eta_normaliser(&q.e_eta, tol)?;
    let ae = &u2 * &q.a_eta;
    let be = &u2 * &b_eta;
    let m_eta = q.sizes.m_eta;
    let a_eta1 = block(&ae, 0, 0, n_eta, n_eta);
    let a_eta2 = block(&ae, n_eta, 0, m_eta - n_eta, n_eta);
    let b_eta1 = block(&be, 0, 0, n_eta, l + p);
    let b_eta2 = block(&be, n_eta, 0, m_eta - n_eta, l + p);

    let mut m = -(&k_sigma * &b_sigma);
    let eta_folded = Subspace::kernel(&a_eta2, tol).is_zero();
    let (n_mat, h, r, gain) = if eta_folded {
        let a2_pinv = if a_eta2.nrows() == a_eta2.ncols() { inverse(&a_eta2, tol)? } else { pinv(&a_eta2, tol) };
        m -= &k_eta * a2_pinv * &b_eta2;
        (split.minus.clone(), b_f2.clone(), k_f2.clone(), None)
    } else {
        let gain = place_poles(&a_eta1, &a_eta2, tol.synthesis_margin, tol)?;
        let n_eta_mat = &a_eta1 - &gain * &a_eta2;
        let h_eta = &b_eta1 - &gain * &b_eta2;
        (
            block_diag(&[&split.minus, &n_eta_mat]),
            vcat(&[&b_f2, &h_eta]),
            hcat(&[&k_f2, &k_eta]),
            Some(gain),
        )
    };

    let to_reduced = block(&sc.v.transpose(), 0, 0, n_o, d.n);
    let coords = &q.q_inv * to_reduced;
    let f_rows = q.col_range(1);
    let f_coords = block(&coords, f_rows.start, 0, f_rows.len(), d.n);
    let f2_map = block(&split.t_inv, nf1, 0, nf2, nf1 + nf2) * f_coords;
    let state_map = if eta_folded {
        f2_map
    } else {
        let e_rows = q.col_range(3);
        vcat(&[&f2_map, &block(&coords, e_rows.start, 0, e_rows.len(), d.n)])
    };

    let estimator = Estimator::new(n_mat, h, r, m)?;
    if estimator.spectral_abscissa() >= 0.0 {
        return Err(Error::Internal(format!("N is not Hurwitz (abscissa {:.3e})", estimator.spectral_abscissa())));
    }
    let trace = SynthesisTrace {
        analysis,
        staircase: sc,
        k_eps,
        k_f,
        k_sigma,
        k_eta,
        b_f,
        b_sigma,
        b_eta,
        u1: split.t.clone(),
        j_f1: split.plus,
        j_f2: split.minus,
        b_f1,
        b_f2,
        k_f1,
        k_f2,
        u2,
        a_eta1,
        a_eta2,
        b_eta1,
        b_eta2,
        gain,
        eta_folded,
        state_map,
        stacked_qkf: q,
    };
    Ok(Synthesis { estimator, trace })
}

/// Invertible `U` with `U E_eta = [I; 0]`.
pub(crate) fn eta_normaliser(e_eta: &Matrix, tol: &Tolerance) -> Result<(Matrix, usize)> {
    let (m, n) = e_eta.shape();
    let mut canonical = Matrix::zeros(m, n);
    canonical.view_mut((0, 0), (n, n)).fill_with_identity();
    if *e_eta == canonical {
        return Ok((Matrix::identity(m, m), n));
    }
    let im = Subspace::image(e_eta, tol);
    if im.dim() != n {
        return Err(Error::Internal("E_eta lacks full column rank".into()));
    }
    let basis = im.basis().clone();
    let perp = im.complement().basis().clone();
    // E_eta = basis * G with G invertible
    let g = basis.transpose() * e_eta;
    let g_inv = inverse(&g, tol)?;
    let top = g_inv * basis.transpose();
    Ok((vcat(&[&top, &perp.transpose()]), n))
}
