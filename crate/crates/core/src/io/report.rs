use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::analysis::AnalysisReport;
use crate::error::{Error, Result};
use crate::sim::DecayMetrics;
use crate::synthesis::TraceSummary;

/// Convergence verdict of one simulated run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayVerdict {
    pub horizon: f64,
    pub dt: f64,
    pub final_error: f64,
    pub tail_sup_last_tenth: f64,
    pub fitted_rate: Option<f64>,
    pub convergent: bool,
}

impl DecayVerdict {
    pub fn from_metrics(horizon: f64, dt: f64, norms: &[f64], m: &DecayMetrics) -> Self {
        let n = m.sup_tail.len();
        DecayVerdict {
            horizon,
            dt,
            final_error: norms.last().copied().unwrap_or(0.0),
            tail_sup_last_tenth: if n == 0 { 0.0 } else { m.sup_tail[n - 1 - (n - 1) / 10] },
            fitted_rate: m.fitted_rate,
            convergent: m.convergent,
        }
    }
}

/// Machine-readable report; `to_json` and `parse` round-trip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub system: String,
    pub analysis: AnalysisReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthesis: Option<TraceSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthesis_error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decay: Option<DecayVerdict>,
}

impl Report {
    pub fn to_json(&self) -> String {
        super::to_pretty_json(self)
    }

    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("line {} column {}: {e}", e.line(), e.column())))
    }
}

fn yes(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

pub fn render_markdown(r: &Report) -> String {
    let a = &r.analysis;
    let mut s = String::new();
    let title = if r.system.is_empty() { "system" } else { r.system.as_str() };
    let _ = writeln!(s, "# Report: {title}\n");
    let d = a.dims;
    let _ = writeln!(s, "States n = {}, equations m = {}, inputs l = {}, outputs p = {}, functionals r = {}.\n", d.n, d.m, d.l, d.p, d.r);
    let _ = writeln!(s, "## Analysis\n");
    let _ = writeln!(s, "| property | holds |");
    let _ = writeln!(s, "|---|---|");
    let _ = writeln!(s, "| partially impulse observable | {} |", yes(a.partially_impulse_observable));
    let _ = writeln!(s, "| partially detectable | {} |", yes(a.partially_detectable.holds));
    let _ = writeln!(s, "| partially causal | {} |", yes(a.partially_causal.holds));
    let _ = writeln!(s, "| **partially causal detectable** | **{}** |\n", yes(a.partially_causal_detectable));
    let rk = a.causal_detectability_ranks;
    let _ = writeln!(s, "Causal detectability ranks: {} without K, {} with K.\n", rk.without_k, rk.with_k);
    let votes: Vec<&str> = a.characterization_votes.iter().map(|&v| yes(v)).collect();
    let _ = writeln!(s, "Equivalent characterizations (i)-(v): {} (agree: {}).\n", votes.join(", "), yes(a.votes_agree));
    if let Some(c) = &a.partially_causal.caveat {
        let _ = writeln!(s, "> {c}\n");
    }
    let _ = writeln!(s, "### Detectability evidence\n");
    let _ = writeln!(s, "| lambda | source | rank | rank with K |");
    let _ = writeln!(s, "|---|---|---|---|");
    for t in &a.partially_detectable.tested {
        let _ = writeln!(s, "| {:.6} {:+.6}i | {} | {} | {} |", t.re, t.im, t.source, t.ranks.without_k, t.ranks.with_k);
    }
    let q = a.diagnostics.stacked_qkf_sizes;
    let _ = writeln!(
        s,
        "\nStacked pencil blocks: eps {}x{}, f {}, sigma {}, eta {}x{}; cond(P) = {:.3e}, cond(Q) = {:.3e}.",
        q.m_eps, q.n_eps, q.n_f, q.n_sigma, q.m_eta, q.n_eta, a.diagnostics.cond_p, a.diagnostics.cond_q
    );
    for w in &a.diagnostics.warnings {
        let _ = writeln!(s, "\n> warning: {w}");
    }
    if let Some(t) = &r.synthesis {
        let _ = writeln!(s, "\n## Estimator\n");
        let _ = writeln!(s, "Order s = {}; eta block folded algebraically: {}.", t.estimator_eigenvalues.len(), yes(t.eta_folded));
        let eig: Vec<String> = t.estimator_eigenvalues.iter().map(|z| format!("{:.6}{:+.6}i", z[0], z[1])).collect();
        let _ = writeln!(s, "Spectrum of N: {}.", eig.join(", "));
        let _ = writeln!(
            s,
            "Staircase depth {}, reduced states {}, unstable modes removed {}, nilpotency index {}.",
            t.staircase_depth, t.reduced_states, t.unstable_modes, t.nilpotency_index
        );
    }
    if let Some(e) = &r.synthesis_error {
        let _ = writeln!(s, "\n## Estimator\n\nNot synthesized: {e}");
    }
    if let Some(v) = &r.decay {
        let _ = writeln!(s, "\n## Simulation\n");
        let rate = v.fitted_rate.map_or("n/a".to_string(), |r| format!("{r:.4}"));
        let _ = writeln!(
            s,
            "Horizon {} with dt = {}: final |e| = {:.3e}, fitted rate {rate}, convergent: {}.",
            v.horizon,
            v.dt,
            v.final_error,
            yes(v.convergent)
        );
    }
    s
}
