use std::fmt::Write as _;
use std::io::Write;

use crate::sim::SimulationTrace;

fn labels(prefix: &str, r: usize) -> Vec<String> {
    if r == 1 {
        vec![prefix.to_string()]
    } else {
        (1..=r).map(|i| format!("{prefix}{i}")).collect()
    }
}

/// CSV with columns `t, z.., zhat.., e..` and a header row.
pub fn write_csv(out: &mut dyn Write, tr: &SimulationTrace) -> std::io::Result<()> {
    let r = tr.z.first().map_or(0, |z| z.len());
    let mut header = vec!["t".to_string()];
    for p in ["z", "zhat", "e"] {
        header.extend(labels(p, r));
    }
    writeln!(out, "{}", header.join(","))?;
    let mut line = String::new();
    for i in 0..tr.t.len() {
        line.clear();
        let _ = write!(line, "{}", tr.t[i]);
        for v in tr.z[i].iter().chain(tr.zhat[i].iter()).chain(tr.e[i].iter()) {
            let _ = write!(line, ",{v}");
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 300.0;
const MAX_POINTS: usize = 2000;

fn panel(s: &mut String, top: f64, title: &str, t: &[f64], series: &[(&str, Vec<f64>)]) {
    let (l, r, h) = (60.0, WIDTH - 20.0, HEIGHT - 60.0);
    let t0 = t.first().copied().unwrap_or(0.0);
    let t1 = t.last().copied().unwrap_or(1.0).max(t0 + 1e-12);
    let finite = series.iter().flat_map(|(_, v)| v.iter().copied()).filter(|v| v.is_finite());
    let (lo, hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let (lo, hi) = if lo.is_finite() { (lo, hi) } else { (0.0, 1.0) };
    let (lo, hi) = if hi - lo < 1e-300 { (lo - 1.0, hi + 1.0) } else { (lo, hi) };
    let sx = |x: f64| l + (x - t0) / (t1 - t0) * (r - l);
    let sy = |y: f64| top + 30.0 + (hi - y) / (hi - lo) * h;
    let _ = writeln!(s, r#"<text x="{l}" y="{}" font-size="14">{title}</text>"#, top + 20.0);
    let _ = writeln!(
        s,
        r##"<rect x="{l}" y="{}" width="{}" height="{h}" fill="none" stroke="#999"/>"##,
        top + 30.0,
        r - l
    );
    let _ = writeln!(s, r#"<text x="5" y="{}" font-size="10">{hi:.3e}</text>"#, top + 35.0);
    let _ = writeln!(s, r#"<text x="5" y="{}" font-size="10">{lo:.3e}</text>"#, top + 30.0 + h);
    let _ = writeln!(s, r#"<text x="{r}" y="{}" font-size="10" text-anchor="end">t = {t1}</text>"#, top + 45.0 + h);
    let colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];
    let stride = t.len().div_ceil(MAX_POINTS).max(1);
    for (k, (name, v)) in series.iter().enumerate() {
        let pts: Vec<String> = (0..t.len())
            .step_by(stride)
            .filter(|&i| v[i].is_finite())
            .map(|i| format!("{:.2},{:.2}", sx(t[i]), sy(v[i])))
            .collect();
        let c = colors[k % colors.len()];
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{c}" stroke-width="1.2" points="{}"/>"#, pts.join(" "));
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="11" fill="{c}">{name}</text>"#,
            l + 10.0 + 80.0 * k as f64,
            top + 45.0
        );
    }
}

/// Two stacked panels: `z` with `zhat`, and `|e|`.
pub fn render_svg(tr: &SimulationTrace) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{}" viewBox="0 0 {WIDTH} {}">"#,
        2.0 * HEIGHT,
        2.0 * HEIGHT
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let r = tr.z.first().map_or(0, |z| z.len());
    let mut series = Vec::new();
    for j in 0..r {
        let suffix = if r == 1 { String::new() } else { (j + 1).to_string() };
        series.push((format!("z{suffix}"), tr.z.iter().map(|z| z[j]).collect::<Vec<_>>()));
        series.push((format!("zhat{suffix}"), tr.zhat.iter().map(|z| z[j]).collect()));
    }
    let named: Vec<(&str, Vec<f64>)> = series.iter().map(|(n, v)| (n.as_str(), v.clone())).collect();
    panel(&mut s, 0.0, "functional and estimate", &tr.t, &named);
    panel(&mut s, HEIGHT, "estimation error", &tr.t, &[("|e|", tr.error_norms())]);
    s.push_str("</svg>\n");
    s
}
