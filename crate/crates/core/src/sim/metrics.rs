use serde::{Deserialize, Serialize};

/// Tail behaviour of an error signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayMetrics {
    /// `sup_{tau >= t_i} |e(tau)|` over the grid.
    pub sup_tail: Vec<f64>,
    /// Least-squares slope of `log sup_tail` over the final half; `None` when
    /// the tail is at the noise floor.
    pub fitted_rate: Option<f64>,
    pub convergent: bool,
}

const RATE_THRESHOLD: f64 = -0.05;

/// Tail supremum and fitted exponential rate of `norms` sampled at `t`.
pub fn decay_metrics(t: &[f64], norms: &[f64]) -> DecayMetrics {
    assert_eq!(t.len(), norms.len(), "decay_metrics: length mismatch");
    let n = norms.len();
    let mut sup_tail = vec![0.0; n];
    let mut acc = 0.0f64;
    for i in (0..n).rev() {
        acc = acc.max(norms[i]);
        sup_tail[i] = acc;
    }
    if n == 0 {
        return DecayMetrics { sup_tail, fitted_rate: None, convergent: true };
    }
    let peak = sup_tail[0];
    let floor = 1e-11 * peak.max(1.0);
    let half = n / 2;
    let pts: Vec<(f64, f64)> =
        (half..n).filter(|&i| sup_tail[i] > floor).map(|i| (t[i], sup_tail[i].ln())).collect();
    let fitted_rate = if pts.len() >= 2 {
        let k = pts.len() as f64;
        let mt = pts.iter().map(|p| p.0).sum::<f64>() / k;
        let ml = pts.iter().map(|p| p.1).sum::<f64>() / k;
        let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
        let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - ml)).sum();
        (sxx > 0.0).then(|| sxy / sxx)
    } else {
        None
    };
    let last_tenth = sup_tail[n - 1 - (n - 1) / 10];
    let convergent = last_tenth <= floor.max(1e-6 * peak) || fitted_rate.is_some_and(|r| r < RATE_THRESHOLD);
    DecayMetrics { sup_tail, fitted_rate, convergent }
}
