use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::toeplitz::{
    build_f, build_f_k, causality_matrix, coupling, coupling_first_block, detectability_pair, first_block_row,
    script_pair,
};
use super::{AnalysisDiagnostics, AnalysisReport, DescriptorSystem};
use crate::decomp::{kalman, qkf, staircase, Qkf};
use crate::error::Result;
use crate::linalg::{
    hcat, max_abs, norm2, numeric_rank_complex, snap_zeros, structured_rank, sample_points, to_complex, vcat, Matrix, Subspace, Tolerance,
};
use crate::wong::wong_limits;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankPair {
    pub without_k: usize,
    pub with_k: usize,
}

impl RankPair {
    pub fn equal(&self) -> bool {
        self.without_k == self.with_k
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaRank {
    pub re: f64,
    pub im: f64,
    pub ranks: RankPair,
    /// `"eigenvalue"` or `"generic"`.
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectabilityEvidence {
    pub holds: bool,
    pub tested: Vec<LambdaRank>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CausalityEvidence {
    pub holds: bool,
    pub ranks: RankPair,
    /// Whether `nrank [sE - A; K] = nrank (sE - A)` holds.
    pub assumption_holds: bool,
    pub caveat: Option<String>,
}

const GENERIC_RHP: [(f64, f64); 4] = [(0.613_254, 0.271_828), (1.931_472, 0.0), (0.377_219, -1.413_567), (2.902_113, 2.200_417)];

fn rank_pair(base: &Matrix, with_k: &Matrix, tol: &Tolerance) -> RankPair {
    RankPair { without_k: structured_rank(base, tol), with_k: structured_rank(with_k, tol) }
}

/// `W*_{[E,A,0,C]} ∩ A^-1(im E) ⊆ ker K`.
pub fn pencil_impulse_observable(e: &Matrix, a: &Matrix, c: &Matrix, k: &Matrix, tol: &Tolerance) -> Result<bool> {
    if e.ncols() == 0 {
        return Ok(true);
    }
    let w = wong_limits(e, a, &Matrix::zeros(e.nrows(), 0), c, tol)?;
    let s = w.w_star().intersect(&Subspace::preimage(a, &Subspace::image(e, tol), tol), tol);
    Ok(s.annihilated_by(k, tol))
}

pub fn is_partially_impulse_observable(sys: &DescriptorSystem, tol: &Tolerance) -> Result<bool> {
    pencil_impulse_observable(&sys.e, &sys.a, &sys.c, &sys.k, tol)
}

/// Rank test on the detectability block matrices over the closed right
/// half-plane, decided on the finite eigenvalues of the stacked pencil with
/// `Re >= -eig_stability_margin` plus generic sample points.
pub fn is_partially_detectable(sys: &DescriptorSystem, tol: &Tolerance) -> Result<DetectabilityEvidence> {
    let st = sys.stacked();
    let k = qkf(&st.e, &st.a, tol)?;
    Ok(detectability_with(sys, &k, tol))
}

fn detectability_with(sys: &DescriptorSystem, stacked_qkf: &Qkf, tol: &Tolerance) -> DetectabilityEvidence {
    let st = sys.stacked();
    let n = sys.dims().n;
    let scale = norm2(&st.a).max(norm2(&st.e)).max(1.0);
    let mut points: Vec<(Complex64, &str)> = Vec::new();
    for ev in stacked_qkf.finite_eigenvalues() {
        if ev.re >= -tol.eig_stability_margin - 1e-9 * scale
            && !points.iter().any(|(p, _)| (p - ev).norm() <= 1e-9 * scale)
        {
            points.push((ev, "eigenvalue"));
        }
    }
    for (re, im) in GENERIC_RHP {
        points.push((Complex64::new(re, im), "generic"));
    }
    let mut tested = Vec::with_capacity(points.len());
    let mut holds = true;
    for (lam, source) in points {
        let (base, with_k) = detectability_pair(&st.e, &st.a, &sys.k, lam, n);
        let ranks = RankPair {
            without_k: numeric_rank_complex(&base, tol),
            with_k: numeric_rank_complex(&with_k, tol),
        };
        holds &= ranks.equal();
        tested.push(LambdaRank { re: lam.re, im: lam.im, ranks, source: source.into() });
    }
    DetectabilityEvidence { holds, tested }
}

/// Detectability rank pair at an arbitrary point, for spot checks.
pub fn detectability_ranks_at(sys: &DescriptorSystem, lambda: Complex64, tol: &Tolerance) -> RankPair {
    let st = sys.stacked();
    let (base, with_k) = detectability_pair(&st.e, &st.a, &sys.k, lambda, sys.dims().n);
    RankPair { without_k: numeric_rank_complex(&base, tol), with_k: numeric_rank_complex(&with_k, tol) }
}

fn normal_rank(e: &Matrix, a: &Matrix, tol: &Tolerance) -> usize {
    sample_points()
        .iter()
        .map(|&lam| numeric_rank_complex(&(to_complex(e) * lam - to_complex(a)), tol))
        .max()
        .unwrap_or(0)
}

/// Causality rank test of the triple `(E, A, B)` with respect to `K`.
pub fn is_partially_causal(e: &Matrix, a: &Matrix, b: &Matrix, k: &Matrix, tol: &Tolerance) -> Result<CausalityEvidence> {
    let n = e.ncols();
    let (base, _) = causality_matrix(e, a, b, e, a, None, None, n);
    let (with_k, _) = causality_matrix(e, a, b, e, a, None, Some(k), n);
    let ranks = rank_pair(&base, &with_k, tol);
    let ek = vcat(&[e, &Matrix::zeros(k.nrows(), e.ncols())]);
    let ak = vcat(&[a, &-k.clone()]);
    let assumption_holds = normal_rank(&ek, &ak, tol) == normal_rank(e, a, tol);
    let caveat = (!assumption_holds).then(|| {
        "nrank [sE - A; K] exceeds nrank(sE - A): the rank test remains sufficient for causality, \
         but a failed test does not prove non-causality"
            .to_string()
    });
    Ok(CausalityEvidence { holds: ranks.equal(), ranks, assumption_holds, caveat })
}

/// Ranks of the causal detectability block matrix without and with the `K` row.
pub fn causal_detectability_ranks(sys: &DescriptorSystem, tol: &Tolerance) -> RankPair {
    let st = sys.stacked();
    let n = sys.dims().n;
    let (base, _) = causality_matrix(&sys.e, &sys.a, &sys.b, &st.e, &st.a, Some(&sys.c), None, n);
    let (with_k, _) = causality_matrix(&sys.e, &sys.a, &sys.b, &st.e, &st.a, Some(&sys.c), Some(&sys.k), n);
    rank_pair(&base, &with_k, tol)
}

/// Rank of `F_{n+1}[E, A]` against `F_{n+1}[E, A, K]`.
pub fn qkf_rank_condition(e: &Matrix, a: &Matrix, k: &Matrix, tol: &Tolerance) -> bool {
    let depth = e.ncols() + 1;
    structured_rank(&build_f(e, a, depth), tol) == structured_rank(&build_f_k(e, a, k, depth), tol)
}

/// `K_eps = 0` and `K_sigma J_sigma = 0` in the coordinates of a quasi-Kronecker form.
pub fn k_vanishes_on_qkf(q: &Qkf, k: &Matrix, tol: &Tolerance) -> bool {
    let [k_eps, _, k_sigma, _] = q.split_cols(k);
    let scale = norm2(k).max(1.0) * norm2(&q.q).max(1.0);
    let atol = tol.subspace_atol() * scale;
    max_abs(&k_eps) <= atol && max_abs(&(k_sigma * &q.j_sigma)) <= atol * norm2(&q.j_sigma).max(1.0)
}

/// The five equivalent characterisations (i)-(v) of partial causal detectability
/// beyond detectability itself.
pub fn characterization_suite(sys: &DescriptorSystem, tol: &Tolerance) -> Result<[bool; 5]> {
    let d = sys.dims();
    let n = d.n;
    let st = sys.stacked();

    let vote_i = causal_detectability_ranks(sys, tol).equal();

    let (se, sa) = script_pair(&sys.e, &sys.a, &sys.b);
    let top = build_f(&se, &sa, n);
    let im_top = Subspace::image(&top, tol);
    let vote_ii = second_characterization(sys, &top, &build_f(&st.e, &st.a, n), tol);

    let w_obs = wong_limits(&sys.e, &sys.a, &Matrix::zeros(d.m, 0), &sys.c, tol)?;
    let w_star = w_obs.w_star();
    let s3 = Subspace::preimage(&coupling_first_block(&sys.a, n), &im_top, tol).intersect(w_star, tol);
    let vote_iii = s3.annihilated_by(&sys.k, tol);

    let w_ctrl = wong_limits(&sys.e, &sys.a, &sys.b, &Matrix::zeros(0, n), tol)?;
    let v_n1 = w_ctrl.v_at(n - 1);
    let s4 = Subspace::preimage(&sys.a, &v_n1.map(&sys.e, tol), tol).intersect(w_star, tol);
    let vote_iv = s4.annihilated_by(&sys.k, tol);

    let vote_v = controllable_part_impulse_observable(sys, tol)?;
    Ok([vote_i, vote_ii, vote_iii, vote_iv, vote_v])
}

/// `K_1` vanishes on `{v : coupling v in im top, C_1 v = 0, lower v = 0}`, decided by
/// comparing ranks of `[[coupling, -top], [C_1, 0], [lower, 0]]` with and without `[K_1, 0]`.
fn second_characterization(sys: &DescriptorSystem, top: &Matrix, lower: &Matrix, tol: &Tolerance) -> bool {
    let n = sys.dims().n;
    let w = top.ncols();
    let pad = |m: &Matrix| hcat(&[m, &Matrix::zeros(m.nrows(), w)]);
    let base = vcat(&[
        &hcat(&[&coupling(&sys.a, n), &-top]),
        &pad(&first_block_row(&sys.c, n)),
        &pad(lower),
    ]);
    let with_k = vcat(&[&base, &pad(&first_block_row(&sys.k, n))]);
    structured_rank(&with_k, tol) == structured_rank(&base, tol)
}

fn controllable_part_impulse_observable(sys: &DescriptorSystem, tol: &Tolerance) -> Result<bool> {
    let sc = staircase(&sys.e, &sys.a, &sys.b, tol)?;
    if sc.n_o == 0 {
        return Ok(true);
    }
    let c_o = sc.reduce_cols(&sys.c);
    let k_o = sc.reduce_cols(&sys.k);
    let kd = kalman(&sc.e_o, &sc.a_o, &sc.b_o, tol)?;
    let [mut c11, _, _] = kd.split_cols(&c_o);
    let [mut k11, _, _] = kd.split_cols(&k_o);
    let t_scale = norm2(&kd.t).max(1.0);
    snap_zeros(&mut c11, 1e-13 * norm2(&sys.c).max(1.0) * t_scale);
    snap_zeros(&mut k11, 1e-13 * norm2(&sys.k).max(1.0) * t_scale);
    pencil_impulse_observable(&kd.e_block(0, 0), &kd.a_block(0, 0), &c11, &k11, tol)
}

/// Full analysis report.
pub fn analyze(sys: &DescriptorSystem, tol: &Tolerance) -> Result<AnalysisReport> {
    tol.validate()?;
    let st = sys.stacked();
    let sq = qkf(&st.e, &st.a, tol)?;
    let detect = detectability_with(sys, &sq, tol);
    let causal = is_partially_causal(&sys.e, &sys.a, &sys.b, &sys.k, tol)?;
    let ranks = causal_detectability_ranks(sys, tol);
    let votes = characterization_suite(sys, tol)?;
    let votes_agree = votes.iter().all(|&v| v == votes[0]);
    let mut warnings = Vec::new();
    if !votes_agree {
        warnings.push(format!("characterisation votes disagree: {votes:?}"));
    }
    if let Some(c) = &causal.caveat {
        warnings.push(c.clone());
    }
    if let Some(r) = &sq.diagnostics.relaxed_retry {
        warnings.push(format!("stacked pencil decomposition needed a relaxed tolerance: {r}"));
    }
    for (name, c) in [("P", sq.diagnostics.cond_p), ("Q", sq.diagnostics.cond_q)] {
        if c > 1e8 {
            warnings.push(format!("condition number of {name} is {c:.2e}"));
        }
    }
    let finite_eigenvalues = sq.finite_eigenvalues().iter().map(|z| [z.re, z.im]).collect();
    Ok(AnalysisReport {
        dims: sys.dims(),
        partially_impulse_observable: is_partially_impulse_observable(sys, tol)?,
        partially_causal_detectable: detect.holds && votes_agree && votes[0],
        partially_detectable: detect,
        partially_causal: causal,
        causal_detectability_ranks: ranks,
        characterization_votes: votes,
        votes_agree,
        diagnostics: AnalysisDiagnostics {
            tolerance: *tol,
            stacked_qkf_sizes: sq.sizes,
            cond_p: sq.diagnostics.cond_p,
            cond_q: sq.diagnostics.cond_q,
            finite_eigenvalues,
            warnings,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sys(e: &[f64], a: &[f64], b: &[f64], c: &[f64], k: &[f64], n: usize) -> DescriptorSystem {
        let m = e.len() / n;
        let l = b.len() / m;
        let p = c.len() / n;
        let r = k.len() / n;
        DescriptorSystem::new(
            Matrix::from_row_slice(m, n, e),
            Matrix::from_row_slice(m, n, a),
            Matrix::from_row_slice(m, l, b),
            Matrix::from_row_slice(p, n, c),
            Matrix::zeros(p, l),
            Matrix::from_row_slice(r, n, k),
        )
        .unwrap()
    }

    #[test]
    fn unstable_unobserved_scalar() {
        let tol = Tolerance::default();
        let s = sys(&[1.0], &[1.0], &[], &[0.0], &[1.0], 1);
        let ev = is_partially_detectable(&s, &tol).unwrap();
        assert!(!ev.holds);
        let at_one = ev.tested.iter().find(|t| (t.re - 1.0).abs() < 1e-9 && t.im == 0.0).unwrap();
        assert!(!at_one.ranks.equal());
    }

    #[test]
    fn zero_functional_is_trivially_fine() {
        let tol = Tolerance::default();
        let s = sys(&[1.0, 0.0, 0.0, 0.0], &[1.0, 0.0, 0.0, 1.0], &[1.0, 1.0], &[0.0, 0.0], &[0.0, 0.0], 2);
        let r = analyze(&s, &tol).unwrap();
        assert!(r.partially_causal_detectable);
        assert_eq!(r.characterization_votes, [true; 5]);
        assert!(r.partially_impulse_observable);
    }

    #[test]
    fn sigma_block_causality() {
        let tol = Tolerance::default();
        let e = Matrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let a = Matrix::identity(2, 2);
        let b = Matrix::from_column_slice(2, 1, &[0.0, 1.0]);
        let k1 = Matrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let k2 = Matrix::from_row_slice(1, 2, &[0.0, 1.0]);
        assert!(!is_partially_causal(&e, &a, &b, &k1, &tol).unwrap().holds);
        assert!(is_partially_causal(&e, &a, &b, &k2, &tol).unwrap().holds);
    }
}
