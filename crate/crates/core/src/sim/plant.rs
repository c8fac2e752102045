use nalgebra::DVector;

use super::{hermite, rk4_step, InputSignal, SimGrid};
use crate::analysis::DescriptorSystem;
use crate::decomp::{qkf, staircase, Qkf, Staircase};
use crate::error::{Error, Result};
use crate::linalg::{block, inverse, norm2, Matrix, Subspace, Tolerance};
use crate::synthesis::eta_normaliser;

const CONSISTENCY_RTOL: f64 = 1e-8;
const DRIFT_RTOL: f64 = 1e-6;

/// Initial data for [`solve_plant`].
#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    /// Full `x(0)`; must satisfy the algebraic constraints at `t = 0`.
    Full(DVector<f64>),
    /// Values of the dynamic coordinates in the quasi-Kronecker form of the
    /// reduced plant: the `eps`, `f` and `eta` blocks. The `eps` entry is
    /// projected onto its determined part; `eta` must be consistent.
    Decomposed { eps: DVector<f64>, f: DVector<f64>, eta: DVector<f64> },
}

/// Plant coordinates used during integration.
#[derive(Debug, Clone)]
struct Layout {
    sc: Staircase,
    q: Qkf,
    /// `x_eps = eps_det * a + eps_free * b`
    eps_det: Matrix,
    eps_free: Matrix,
    eps_rhs_a: Matrix,
    eps_rhs_b: Matrix,
    eps_rhs_u: Matrix,
    b_f: Matrix,
    b_sigma: Matrix,
    eta_a1: Matrix,
    eta_a2: Matrix,
    eta_b1: Matrix,
    eta_b2: Matrix,
}

impl Layout {
    fn new(sys: &DescriptorSystem, tol: &Tolerance) -> Result<Self> {
        let sc = staircase(&sys.e, &sys.a, &sys.b, tol)?;
        let q = qkf(&sc.e_o, &sc.a_o, tol)?;
        let [b_eps, b_f, b_sigma, b_eta] = q.split_rows(&sc.b_o);
        let (m_eps, n_eps) = (q.sizes.m_eps, q.sizes.n_eps);
        let (eps_det, eps_free, g_inv) = if n_eps == 0 {
            (Matrix::zeros(0, 0), Matrix::zeros(0, 0), Matrix::zeros(0, 0))
        } else {
            let row_space = Subspace::image(&q.e_eps.transpose(), tol);
            if row_space.dim() != m_eps {
                return Err(Error::Internal("E_eps lacks full row rank".into()));
            }
            let r = row_space.basis().clone();
            let n = row_space.complement().basis().clone();
            let g = &q.e_eps * &r;
            (r, n, inverse(&g, tol)?)
        };
        let eps_rhs_a = &g_inv * &q.a_eps * &eps_det;
        let eps_rhs_b = &g_inv * &q.a_eps * &eps_free;
        let eps_rhs_u = &g_inv * &b_eps;
        let (u2, n_eta) = eta_normaliser(&q.e_eta, tol)?;
        let ae = &u2 * &q.a_eta;
        let be = &u2 * &b_eta;
        let m_eta = q.sizes.m_eta;
        let l = sys.b.ncols();
        Ok(Layout {
            eta_a1: block(&ae, 0, 0, n_eta, n_eta),
            eta_a2: block(&ae, n_eta, 0, m_eta - n_eta, n_eta),
            eta_b1: block(&be, 0, 0, n_eta, l),
            eta_b2: block(&be, n_eta, 0, m_eta - n_eta, l),
            sc,
            q,
            eps_det,
            eps_free,
            eps_rhs_a,
            eps_rhs_b,
            eps_rhs_u,
            b_f,
            b_sigma,
        })
    }

    fn sizes(&self) -> (usize, usize, usize) {
        (self.eps_det.ncols(), self.q.sizes.n_f, self.q.sizes.n_eta)
    }

    fn eps_free_dim(&self) -> usize {
        self.eps_free.ncols()
    }

    /// `x_sigma(t) = -sum_i J^i B_sigma u^(i)(t)`; `shift = 1` gives its derivative.
    fn sigma(&self, u: &InputSignal, t: f64, shift: usize) -> DVector<f64> {
        let ns = self.q.sizes.n_sigma;
        let mut out = DVector::zeros(ns);
        if ns == 0 {
            return out;
        }
        let mut jb = self.b_sigma.clone();
        for i in 0..self.q.nilpotency_index.max(1) {
            out -= &jb * u.derivative(t, i + shift);
            jb = &self.q.j_sigma * jb;
        }
        out
    }

    fn free(&self, eps_free: Option<&InputSignal>, t: f64) -> DVector<f64> {
        match eps_free {
            Some(s) => s.value(t),
            None => DVector::zeros(self.eps_free_dim()),
        }
    }

    /// Right-hand side of the integrated coordinates `[a; x_f; x_eta]`.
    fn rhs(&self, s: &DVector<f64>, u: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
        let (na, nf, ne) = self.sizes();
        let a = s.rows(0, na);
        let f = s.rows(na, nf);
        let eta = s.rows(na + nf, ne);
        let mut out = DVector::zeros(na + nf + ne);
        if na > 0 {
            out.rows_mut(0, na).copy_from(&(&self.eps_rhs_a * a + &self.eps_rhs_b * b + &self.eps_rhs_u * u));
        }
        out.rows_mut(na, nf).copy_from(&(&self.q.j_f * f + &self.b_f * u));
        out.rows_mut(na + nf, ne).copy_from(&(&self.eta_a1 * eta + &self.eta_b1 * u));
        out
    }

    /// QKF coordinates of the reduced plant from the integrated state.
    fn coords(&self, s: &DVector<f64>, b: &DVector<f64>, sigma: &DVector<f64>) -> DVector<f64> {
        let (na, nf, ne) = self.sizes();
        let eps = &self.eps_det * s.rows(0, na) + &self.eps_free * b;
        let mut xi = DVector::zeros(self.q.sizes.cols().iter().sum());
        xi.rows_mut(self.q.col_range(0).start, eps.len()).copy_from(&eps);
        xi.rows_mut(self.q.col_range(1).start, nf).copy_from(&s.rows(na, nf));
        xi.rows_mut(self.q.col_range(2).start, sigma.len()).copy_from(sigma);
        xi.rows_mut(self.q.col_range(3).start, ne).copy_from(&s.rows(na + nf, ne));
        xi
    }

    fn to_x(&self, xi: &DVector<f64>) -> DVector<f64> {
        self.sc.embedding() * (&self.q.q * xi)
    }

    fn eta_residual(&self, s: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        let (na, nf, ne) = self.sizes();
        &self.eta_a2 * s.rows(na + nf, ne) + &self.eta_b2 * u
    }
}

/// Sampled plant solution with dense output for the estimator.
#[derive(Debug, Clone)]
pub struct PlantTrajectory {
    pub grid: SimGrid,
    pub x: Vec<DVector<f64>>,
    pub x_decomposed: Vec<DVector<f64>>,
    pub u: Vec<DVector<f64>>,
    pub y: Vec<DVector<f64>>,
    pub z: Vec<DVector<f64>>,
    pub max_eta_residual: f64,
    pub max_sigma_residual: f64,
    pub nilpotency_index: usize,
    layout: Layout,
    input: InputSignal,
    eps_signal: Option<InputSignal>,
    states: Vec<DVector<f64>>,
    slopes: Vec<DVector<f64>>,
    c: Matrix,
    d: Matrix,
}

impl PlantTrajectory {
    /// Plant state at an arbitrary `t` in the horizon.
    pub fn x_at(&self, t: f64) -> DVector<f64> {
        let dt = self.grid.dt;
        let i = ((t / dt).floor() as usize).min(self.grid.steps.saturating_sub(1));
        let s = if self.grid.steps == 0 {
            self.states[0].clone()
        } else {
            let theta = (t - self.grid.time(i)) / dt;
            hermite(&self.states[i], &self.slopes[i], &self.states[i + 1], &self.slopes[i + 1], dt, theta)
        };
        let b = self.layout.free(self.eps_signal.as_ref(), t);
        let sigma = self.layout.sigma(&self.input, t, 0);
        self.layout.to_x(&self.layout.coords(&s, &b, &sigma))
    }

    pub fn y_at(&self, t: f64) -> DVector<f64> {
        &self.c * self.x_at(t) + &self.d * self.input.value(t)
    }

    pub fn input(&self) -> &InputSignal {
        &self.input
    }
}

fn check_dim(name: &str, v: &DVector<f64>, n: usize) -> Result<()> {
    if v.len() != n {
        return Err(Error::shape(format!("{name} has {} entries, expected {n}", v.len())));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::shape(format!("{name} has non-finite entries")));
    }
    Ok(())
}

fn first_violation(name: &str, r: &DVector<f64>, atol: f64) -> Result<()> {
    if let Some((i, v)) = r.iter().enumerate().find(|(_, v)| v.abs() > atol) {
        return Err(Error::InconsistentInitial { row: format!("{name} constraint {}", i + 1), residual: v.abs() });
    }
    Ok(())
}

/// Solve the plant on `grid`. The f, eta and determined eps coordinates are
/// integrated by RK4; sigma is evaluated from the input derivatives; the free
/// eps component follows `eps_free` (zero when absent).
pub fn solve_plant(
    sys: &DescriptorSystem,
    x0: &InitialState,
    u: &InputSignal,
    eps_free: Option<&InputSignal>,
    grid: SimGrid,
    tol: &Tolerance,
) -> Result<PlantTrajectory> {
    let dims = sys.dims();
    if u.dim() != dims.l {
        return Err(Error::shape(format!("input has {} channels, system has {}", u.dim(), dims.l)));
    }
    let lay = Layout::new(sys, tol)?;
    if let Some(s) = eps_free {
        if s.dim() != lay.eps_free_dim() {
            return Err(Error::shape(format!(
                "free eps signal has {} channels, expected {}",
                s.dim(),
                lay.eps_free_dim()
            )));
        }
    }
    let h = lay.q.nilpotency_index;
    if u.smoothness() < h {
        return Err(Error::Smoothness { order: h });
    }
    let (na, nf, ne) = lay.sizes();
    let u0 = u.value(0.0);
    let mut s0 = DVector::zeros(na + nf + ne);
    match x0 {
        InitialState::Full(x) => {
            check_dim("x0", x, dims.n)?;
            let atol = CONSISTENCY_RTOL * x.norm().max(1.0).max(u0.norm());
            let xv = lay.sc.v.transpose() * x;
            first_violation("staircase", &xv.rows(lay.sc.n_o, dims.n - lay.sc.n_o).into_owned(), atol)?;
            let [eps, f, sigma, eta] = lay.q.split_coords(&xv.rows(0, lay.sc.n_o).into_owned());
            first_violation("sigma", &(&sigma - lay.sigma(u, 0.0, 0)), atol)?;
            if na > 0 {
                s0.rows_mut(0, na).copy_from(&(lay.eps_det.transpose() * eps));
            }
            s0.rows_mut(na, nf).copy_from(&f);
            s0.rows_mut(na + nf, ne).copy_from(&eta);
            first_violation("eta", &lay.eta_residual(&s0, &u0), atol)?;
        }
        InitialState::Decomposed { eps, f, eta } => {
            check_dim("eps", eps, lay.q.sizes.n_eps)?;
            check_dim("f", f, nf)?;
            check_dim("eta", eta, ne)?;
            if na > 0 {
                s0.rows_mut(0, na).copy_from(&(lay.eps_det.transpose() * eps));
            }
            s0.rows_mut(na, nf).copy_from(f);
            s0.rows_mut(na + nf, ne).copy_from(eta);
            let atol = CONSISTENCY_RTOL * s0.norm().max(1.0).max(u0.norm());
            first_violation("eta", &lay.eta_residual(&s0, &u0), atol)?;
        }
    }

    let rhs = |t: f64, s: &DVector<f64>| lay.rhs(s, &u.value(t), &lay.free(eps_free, t));
    let len = grid.len();
    let mut states = Vec::with_capacity(len);
    let mut slopes = Vec::with_capacity(len);
    let mut xs = Vec::with_capacity(len);
    let mut xis = Vec::with_capacity(len);
    let mut us = Vec::with_capacity(len);
    let mut ys = Vec::with_capacity(len);
    let mut zs = Vec::with_capacity(len);
    let (mut max_eta, mut max_sigma) = (0.0f64, 0.0f64);
    let scale_sigma = norm2(&lay.q.j_sigma).max(1.0);
    let mut s = s0;
    for i in 0..len {
        let t = grid.time(i);
        let ut = u.value(t);
        let b = lay.free(eps_free, t);
        let sigma = lay.sigma(u, t, 0);
        let res = lay.eta_residual(&s, &ut);
        let eta_res = res.amax();
        let scale = s.norm().max(ut.norm()).max(1.0);
        if eta_res > DRIFT_RTOL * scale {
            let row = res.iamax();
            return Err(Error::InconsistentInput { t, row: format!("eta constraint {}", row + 1), residual: eta_res });
        }
        max_eta = max_eta.max(eta_res / scale);
        if sigma.len() > 0 {
            let dsigma = lay.sigma(u, t, 1);
            let r = &lay.q.j_sigma * dsigma - &sigma - &lay.b_sigma * &ut;
            max_sigma = max_sigma.max(r.amax() / (scale_sigma * sigma.norm().max(ut.norm()).max(1.0)));
        }
        let xi = lay.coords(&s, &b, &sigma);
        let x = lay.to_x(&xi);
        ys.push(&sys.c * &x + &sys.d * &ut);
        zs.push(&sys.k * &x);
        xs.push(x);
        xis.push(xi);
        slopes.push(lay.rhs(&s, &ut, &b));
        us.push(ut);
        states.push(s.clone());
        if i + 1 < len {
            s = rk4_step(&rhs, t, &s, grid.dt);
            if s.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numerical(format!("plant state overflowed at t = {}", grid.time(i + 1))));
            }
        }
    }
    Ok(PlantTrajectory {
        grid,
        x: xs,
        x_decomposed: xis,
        u: us,
        y: ys,
        z: zs,
        max_eta_residual: max_eta,
        max_sigma_residual: max_sigma,
        nilpotency_index: h,
        layout: lay,
        input: u.clone(),
        eps_signal: eps_free.cloned(),
        states,
        slopes,
        c: sys.c.clone(),
        d: sys.d.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::Scalar;

    fn scalar_system(a: f64) -> DescriptorSystem {
        DescriptorSystem::new(
            Matrix::identity(1, 1),
            Matrix::from_element(1, 1, a),
            Matrix::from_element(1, 1, 1.0),
            Matrix::from_element(1, 1, 1.0),
            Matrix::zeros(1, 1),
            Matrix::from_element(1, 1, 1.0),
        )
        .unwrap()
    }

    #[test]
    fn scalar_ode_matches_closed_form() {
        let sys = scalar_system(-2.0);
        let grid = SimGrid::new(2.0, 1e-2).unwrap();
        let u = InputSignal::new(vec![Scalar::Poly(vec![1.0])]);
        let p = solve_plant(&sys, &InitialState::Full(DVector::from_element(1, 3.0)), &u, None, grid, &Tolerance::default())
            .unwrap();
        for (i, x) in p.x.iter().enumerate() {
            let t = grid.time(i);
            let exact = 0.5 + 2.5 * (-2.0 * t).exp();
            assert!((x[0] - exact).abs() < 1e-8, "t = {t}");
        }
        let exact_mid = 0.5 + 2.5 * (-2.0f64 * 1.005).exp();
        assert!((p.x_at(1.005)[0] - exact_mid).abs() < 1e-8);
    }

    #[test]
    fn algebraic_state_follows_input() {
        // 0 = x + u
        let sys = DescriptorSystem::new(
            Matrix::zeros(1, 1),
            Matrix::from_element(1, 1, 1.0),
            Matrix::from_element(1, 1, 1.0),
            Matrix::zeros(0, 1),
            Matrix::zeros(0, 1),
            Matrix::from_element(1, 1, 1.0),
        )
        .unwrap();
        let grid = SimGrid::new(1.0, 0.1).unwrap();
        let u = InputSignal::parse("sin(1,1,0)").unwrap();
        let tol = Tolerance::default();
        let p = solve_plant(&sys, &InitialState::Full(DVector::zeros(1)), &u, None, grid, &tol).unwrap();
        for (i, x) in p.x.iter().enumerate() {
            assert!((x[0] + grid.time(i).sin()).abs() < 1e-14);
        }
        let bad = solve_plant(&sys, &InitialState::Full(DVector::from_element(1, 1.0)), &u, None, grid, &tol);
        assert!(matches!(bad, Err(Error::InconsistentInitial { .. })));
    }
}
