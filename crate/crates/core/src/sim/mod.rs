//! Plant trajectories from the quasi-Kronecker solution formulas, estimator
//! integration and error decay measurement.

mod estimator;
mod metrics;
mod plant;
mod signal;

pub use estimator::{error_trace, run_estimator, Drive, EstimatorTrace, SampledDrive};
pub use metrics::{decay_metrics, DecayMetrics};
pub use plant::{solve_plant, InitialState, PlantTrajectory};
pub use signal::{InputSignal, Scalar};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::analysis::DescriptorSystem;
use crate::error::{Error, Result};
use crate::linalg::Tolerance;
use crate::synthesis::Estimator;

pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_HORIZON: f64 = 30.0;

/// Uniform grid `t_i = i dt`, `i = 0..=steps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimGrid {
    pub dt: f64,
    pub steps: usize,
}

impl SimGrid {
    pub fn new(horizon: f64, dt: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::Grid(format!("step size must be positive and finite, got {dt}")));
        }
        if !(horizon.is_finite() && horizon >= 0.0) {
            return Err(Error::Grid(format!("horizon must be non-negative and finite, got {horizon}")));
        }
        let steps = (horizon / dt).round();
        if (steps * dt - horizon).abs() > 1e-9 * horizon.max(dt) {
            return Err(Error::Grid(format!("horizon {horizon} is not a multiple of dt = {dt}")));
        }
        if steps > 1e8 {
            return Err(Error::Grid(format!("{steps} steps exceed the limit of 1e8")));
        }
        Ok(SimGrid { dt, steps: steps as usize })
    }

    pub fn horizon(&self) -> f64 {
        self.steps as f64 * self.dt
    }

    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.dt
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.time(i)).collect()
    }

    /// Index of the sample at `t`, if `t` lies on the grid.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let i = (t / self.dt).round();
        ((i * self.dt - t).abs() <= 1e-9 * self.dt && i >= 0.0 && i as usize <= self.steps).then_some(i as usize)
    }
}

/// One classical Runge-Kutta step for `x' = f(t, x)`.
pub(crate) fn rk4_step(f: &dyn Fn(f64, &DVector<f64>) -> DVector<f64>, t: f64, x: &DVector<f64>, dt: f64) -> DVector<f64> {
    let k1 = f(t, x);
    let k2 = f(t + 0.5 * dt, &(x + &k1 * (0.5 * dt)));
    let k3 = f(t + 0.5 * dt, &(x + &k2 * (0.5 * dt)));
    let k4 = f(t + dt, &(x + &k3 * dt));
    x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0)
}

/// Cubic Hermite interpolation between `(x0, d0)` and `(x1, d1)` at `theta in [0, 1]`.
pub(crate) fn hermite(
    x0: &DVector<f64>,
    d0: &DVector<f64>,
    x1: &DVector<f64>,
    d1: &DVector<f64>,
    dt: f64,
    theta: f64,
) -> DVector<f64> {
    let t2 = theta * theta;
    let t3 = t2 * theta;
    let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    let h10 = t3 - 2.0 * t2 + theta;
    let h01 = -2.0 * t3 + 3.0 * t2;
    let h11 = t3 - t2;
    x0 * h00 + d0 * (h10 * dt) + x1 * h01 + d1 * (h11 * dt)
}

/// Everything recorded along one plant/estimator run.
#[derive(Debug, Clone)]
pub struct SimulationTrace {
    pub grid: SimGrid,
    pub t: Vec<f64>,
    /// Plant state in original coordinates.
    pub x: Vec<DVector<f64>>,
    /// Plant state in the coordinates of the quasi-Kronecker form of the reduced plant.
    pub x_decomposed: Vec<DVector<f64>>,
    pub u: Vec<DVector<f64>>,
    pub y: Vec<DVector<f64>>,
    pub z: Vec<DVector<f64>>,
    pub w: Vec<DVector<f64>>,
    pub zhat: Vec<DVector<f64>>,
    pub e: Vec<DVector<f64>>,
    pub integrator_order: usize,
    pub max_eta_residual: f64,
    pub max_sigma_residual: f64,
}

impl SimulationTrace {
    pub fn error_norms(&self) -> Vec<f64> {
        self.e.iter().map(|e| e.norm()).collect()
    }

    pub fn metrics(&self) -> DecayMetrics {
        decay_metrics(&self.t, &self.error_norms())
    }
}

/// Plant solve, estimator run and error in one call.
#[allow(clippy::too_many_arguments)]
pub fn simulate(
    sys: &DescriptorSystem,
    est: &Estimator,
    x0: &InitialState,
    w0: &DVector<f64>,
    u: &InputSignal,
    eps_free: Option<&InputSignal>,
    grid: SimGrid,
    tol: &Tolerance,
) -> Result<SimulationTrace> {
    est.check_compatible(sys)?;
    let plant = solve_plant(sys, x0, u, eps_free, grid, tol)?;
    let et = run_estimator(est, grid, &plant, w0)?;
    let e = error_trace(sys, est, &plant, &et);
    Ok(SimulationTrace {
        grid,
        t: grid.times(),
        x_decomposed: plant.x_decomposed.clone(),
        u: plant.u.clone(),
        y: plant.y.clone(),
        z: plant.z.clone(),
        max_eta_residual: plant.max_eta_residual,
        max_sigma_residual: plant.max_sigma_residual,
        x: plant.x,
        w: et.w,
        zhat: et.zhat,
        e,
        integrator_order: 4,
    })
}
