use nalgebra::DVector;

use super::{rk4_step, PlantTrajectory, SimGrid};
use crate::analysis::DescriptorSystem;
use crate::error::{Error, Result};
use crate::linalg::{block, Matrix};
use crate::synthesis::Estimator;

/// Source of the estimator input `[u; y]`.
pub trait Drive {
    fn grid(&self) -> SimGrid;
    fn dim(&self) -> usize;
    fn at(&self, t: f64) -> DVector<f64>;
}

impl Drive for PlantTrajectory {
    fn grid(&self) -> SimGrid {
        self.grid
    }

    fn dim(&self) -> usize {
        self.u.first().map_or(0, |u| u.len()) + self.y.first().map_or(0, |y| y.len())
    }

    fn at(&self, t: f64) -> DVector<f64> {
        let u = self.input().value(t);
        let y = self.y_at(t);
        DVector::from_iterator(u.len() + y.len(), u.iter().chain(y.iter()).copied())
    }
}

/// Drive given only by samples on a grid, interpolated by Catmull-Rom cubics (exact on quadratics).
#[derive(Debug, Clone, PartialEq)]
pub struct SampledDrive {
    pub grid: SimGrid,
    pub samples: Vec<DVector<f64>>,
}

impl SampledDrive {
    pub fn new(grid: SimGrid, samples: Vec<DVector<f64>>) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(Error::Grid(format!("{} samples for a grid of {} points", samples.len(), grid.len())));
        }
        let dim = samples[0].len();
        if samples.iter().any(|s| s.len() != dim) {
            return Err(Error::Grid("samples differ in length".into()));
        }
        Ok(SampledDrive { grid, samples })
    }
}

impl Drive for SampledDrive {
    fn grid(&self) -> SimGrid {
        self.grid
    }

    fn dim(&self) -> usize {
        self.samples[0].len()
    }

    fn at(&self, t: f64) -> DVector<f64> {
        let n = self.grid.steps;
        if n == 0 {
            return self.samples[0].clone();
        }
        let i = ((t / self.grid.dt).floor() as usize).min(n - 1);
        let theta = t / self.grid.dt - i as f64;
        let p1 = &self.samples[i];
        let p2 = &self.samples[i + 1];
        let s = &self.samples;
        let p0 = match i {
            0 if n >= 2 => p1 * 3.0 - p2 * 3.0 + &s[2],
            0 => p1 * 2.0 - p2,
            _ => s[i - 1].clone(),
        };
        let p3 = if i + 2 <= n {
            s[i + 2].clone()
        } else if n >= 2 {
            p2 * 3.0 - p1 * 3.0 + &s[i - 1]
        } else {
            p2 * 2.0 - p1
        };
        let t2 = theta * theta;
        let t3 = t2 * theta;
        (p1 * 2.0 + (p2 - &p0) * theta + (&p0 * 2.0 - p1 * 5.0 + p2 * 4.0 - &p3) * t2 + (p1 * 3.0 - &p0 - p2 * 3.0 + &p3) * t3)
            * 0.5
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorTrace {
    pub grid: SimGrid,
    pub w: Vec<DVector<f64>>,
    pub zhat: Vec<DVector<f64>>,
}

/// Integrate `w' = N w + H v`, `z_hat = R w + M v` with `v` taken from `drive`.
pub fn run_estimator(est: &Estimator, grid: SimGrid, drive: &dyn Drive, w0: &DVector<f64>) -> Result<EstimatorTrace> {
    if drive.grid() != grid {
        return Err(Error::Grid(format!("drive grid {:?} differs from estimator grid {:?}", drive.grid(), grid)));
    }
    if drive.dim() != est.inputs() {
        return Err(Error::shape(format!("drive has {} channels, estimator takes {}", drive.dim(), est.inputs())));
    }
    if w0.len() != est.order() {
        return Err(Error::shape(format!("w0 has {} entries, estimator order is {}", w0.len(), est.order())));
    }
    if w0.iter().any(|v| !v.is_finite()) {
        return Err(Error::shape("w0 has non-finite entries"));
    }
    let f = |t: f64, w: &DVector<f64>| &est.n * w + &est.h * drive.at(t);
    let mut ws = Vec::with_capacity(grid.len());
    let mut zs = Vec::with_capacity(grid.len());
    let mut w = w0.clone();
    for i in 0..grid.len() {
        let t = grid.time(i);
        zs.push(&est.r * &w + &est.m * drive.at(t));
        ws.push(w.clone());
        if i + 1 < grid.len() {
            w = rk4_step(&f, t, &w, grid.dt);
        }
    }
    Ok(EstimatorTrace { grid, w: ws, zhat: zs })
}

/// `e = z_hat - z`, evaluated as `R w + (M_u + M_y D) u + (M_y C - K) x` so that
/// plant modes cancelled by the estimator never enter as a difference of large numbers.
pub fn error_trace(sys: &DescriptorSystem, est: &Estimator, plant: &PlantTrajectory, et: &EstimatorTrace) -> Vec<DVector<f64>> {
    let d = sys.dims();
    let m_u = block(&est.m, 0, 0, d.r, d.l);
    let m_y = block(&est.m, 0, d.l, d.r, d.p);
    let on_u: Matrix = &m_u + &m_y * &sys.d;
    let on_x: Matrix = &m_y * &sys.c - &sys.k;
    (0..et.w.len()).map(|i| &est.r * &et.w[i] + &on_u * &plant.u[i] + &on_x * &plant.x[i]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sampled_drive_reproduces_quadratics() {
        let grid = SimGrid::new(1.0, 0.1).unwrap();
        let f = |t: f64| 1.0 + t - 2.0 * t * t;
        let samples = grid.times().into_iter().map(|t| DVector::from_element(1, f(t))).collect();
        let d = SampledDrive::new(grid, samples).unwrap();
        for &t in &[0.05, 0.42, 0.97] {
            assert!((d.at(t)[0] - f(t)).abs() < 1e-12, "t = {t}");
        }
    }

    #[test]
    fn zero_estimator_gives_zero() {
        let est = Estimator::new(Matrix::from_element(1, 1, -1.0), Matrix::zeros(1, 2), Matrix::zeros(1, 1), Matrix::zeros(1, 2))
            .unwrap();
        let grid = SimGrid::new(1.0, 0.1).unwrap();
        let samples = grid.times().into_iter().map(|t| DVector::from_vec(vec![t, t * t])).collect();
        let d = SampledDrive::new(grid, samples).unwrap();
        let tr = run_estimator(&est, grid, &d, &DVector::zeros(1)).unwrap();
        assert!(tr.zhat.iter().all(|z| z[0] == 0.0));
        let other = SimGrid::new(1.0, 0.05).unwrap();
        assert!(matches!(run_estimator(&est, other, &d, &DVector::zeros(1)), Err(Error::Grid(_))));
    }
}
