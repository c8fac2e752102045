//! File formats: system and estimator JSON documents, input and vector flags,
//! CSV and SVG traces, JSON and Markdown reports.

mod report;
mod trace;

pub use report::{render_markdown, DecayVerdict, Report};
pub use trace::{render_svg, write_csv};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::analysis::DescriptorSystem;
use crate::error::{Error, Result};
use crate::linalg::{Matrix, Tolerance};
use crate::synthesis::{rows_of, Estimator, TraceSummary};

type Rows = Vec<Vec<f64>>;

/// Optional tolerance overrides in a system file.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank_rtol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eig_stability_margin: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthesis_margin: Option<f64>,
}

impl ToleranceOverrides {
    pub fn apply(&self, base: Tolerance) -> Tolerance {
        Tolerance {
            rank_rtol: self.rank_rtol.unwrap_or(base.rank_rtol),
            eig_stability_margin: self.eig_stability_margin.unwrap_or(base.eig_stability_margin),
            synthesis_margin: self.synthesis_margin.unwrap_or(base.synthesis_margin),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemDoc {
    #[serde(default)]
    name: String,
    #[serde(rename = "E")]
    e: Rows,
    #[serde(rename = "A")]
    a: Rows,
    #[serde(rename = "B")]
    b: Rows,
    #[serde(rename = "C")]
    c: Rows,
    #[serde(rename = "D")]
    d: Rows,
    #[serde(rename = "K")]
    k: Rows,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tolerance: Option<ToleranceOverrides>,
}

/// A named system with optional tolerance overrides.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemFile {
    pub name: String,
    pub system: DescriptorSystem,
    pub tolerance: Option<ToleranceOverrides>,
}

/// Row-major nested arrays to a matrix. An empty list is a matrix with zero
/// rows and `cols_if_empty` columns.
fn to_matrix(name: &str, rows: &Rows, cols_if_empty: usize) -> Result<Matrix> {
    if rows.is_empty() {
        return Ok(Matrix::zeros(0, cols_if_empty));
    }
    let cols = rows[0].len();
    for (i, r) in rows.iter().enumerate() {
        if r.len() != cols {
            return Err(Error::Parse(format!("{name} row {} has {} entries, row 1 has {cols}", i + 1, r.len())));
        }
        if let Some(j) = r.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { name: name.into(), row: i, col: j });
        }
    }
    Ok(Matrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

/// Pretty JSON with every array of scalars kept on one line.
pub fn to_pretty_json<T: Serialize>(value: &T) -> String {
    fn go(v: &serde_json::Value, indent: usize, out: &mut String) {
        use serde_json::Value;
        let pad = "  ".repeat(indent + 1);
        match v {
            Value::Array(items) if items.iter().any(|i| i.is_array() || i.is_object()) => {
                out.push_str("[\n");
                for (k, item) in items.iter().enumerate() {
                    out.push_str(&pad);
                    go(item, indent + 1, out);
                    out.push_str(if k + 1 < items.len() { ",\n" } else { "\n" });
                }
                out.push_str(&"  ".repeat(indent));
                out.push(']');
            }
            Value::Object(map) if !map.is_empty() => {
                out.push_str("{\n");
                for (k, (key, item)) in map.iter().enumerate() {
                    out.push_str(&pad);
                    out.push_str(&Value::String(key.clone()).to_string());
                    out.push_str(": ");
                    go(item, indent + 1, out);
                    out.push_str(if k + 1 < map.len() { ",\n" } else { "\n" });
                }
                out.push_str(&"  ".repeat(indent));
                out.push('}');
            }
            Value::Array(items) => {
                let parts: Vec<String> = items.iter().map(|i| i.to_string()).collect();
                out.push('[');
                out.push_str(&parts.join(", "));
                out.push(']');
            }
            other => out.push_str(&other.to_string()),
        }
    }
    let v = serde_json::to_value(value).expect("value serializes");
    let mut out = String::new();
    go(&v, 0, &mut out);
    out.push('\n');
    out
}

fn parse_json<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Parse(format!("line {} column {}: {e}", e.line(), e.column())))
}

impl SystemFile {
    pub fn parse(text: &str) -> Result<Self> {
        let doc: SystemDoc = parse_json(text)?;
        let width = |r: &Rows| r.first().map(|row| row.len());
        let n = width(&doc.e).or(width(&doc.a)).or(width(&doc.c)).or(width(&doc.k)).unwrap_or(0);
        let e = to_matrix("E", &doc.e, n)?;
        let m = e.nrows();
        let a = to_matrix("A", &doc.a, n)?;
        if doc.b.is_empty() && m > 0 {
            return Err(Error::Parse(format!("B must have {m} rows (use [[], ...] for a system without inputs)")));
        }
        let l = width(&doc.b).or(width(&doc.d)).unwrap_or(0);
        let b = to_matrix("B", &doc.b, l)?;
        let c = to_matrix("C", &doc.c, n)?;
        let d = to_matrix("D", &doc.d, b.ncols())?;
        let k = to_matrix("K", &doc.k, n)?;
        if e.shape() != a.shape() {
            return Err(Error::shape(format!(
                "E vs A (E is {}x{}, A is {}x{})",
                e.nrows(),
                e.ncols(),
                a.nrows(),
                a.ncols()
            )));
        }
        let system = DescriptorSystem::new(e, a, b, c, d, k)?;
        if let Some(t) = &doc.tolerance {
            t.apply(Tolerance::default()).validate()?;
        }
        Ok(SystemFile { name: doc.name, system, tolerance: doc.tolerance })
    }

    pub fn to_json(&self) -> String {
        let s = &self.system;
        let doc = SystemDoc {
            name: self.name.clone(),
            e: rows_of(&s.e),
            a: rows_of(&s.a),
            b: rows_of(&s.b),
            c: rows_of(&s.c),
            d: rows_of(&s.d),
            k: rows_of(&s.k),
            tolerance: self.tolerance,
        };
        to_pretty_json(&doc)
    }

    pub fn tolerance(&self, base: Tolerance) -> Tolerance {
        self.tolerance.map_or(base, |t| t.apply(base))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EstimatorDoc {
    #[serde(default)]
    name: String,
    s: usize,
    n_inputs: usize,
    n_outputs: usize,
    #[serde(rename = "N")]
    n: Rows,
    #[serde(rename = "H")]
    h: Rows,
    #[serde(rename = "R")]
    r: Rows,
    #[serde(rename = "M")]
    m: Rows,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    state_map: Option<Rows>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    trace: Option<TraceSummary>,
}

/// Estimator realisation as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorFile {
    pub name: String,
    pub estimator: Estimator,
    pub trace: Option<TraceSummary>,
}

impl EstimatorFile {
    pub fn parse(text: &str) -> Result<Self> {
        let doc: EstimatorDoc = parse_json(text)?;
        let n = to_matrix("N", &doc.n, doc.s)?;
        let h = if doc.h.is_empty() { Matrix::zeros(0, doc.n_inputs) } else { to_matrix("H", &doc.h, 0)? };
        let r = to_matrix("R", &doc.r, doc.s)?;
        let m = to_matrix("M", &doc.m, doc.n_inputs)?;
        let shape_ok = n.shape() == (doc.s, doc.s)
            && h.shape() == (doc.s, doc.n_inputs)
            && r.shape() == (doc.n_outputs, doc.s)
            && m.shape() == (doc.n_outputs, doc.n_inputs);
        if !shape_ok {
            return Err(Error::shape(format!(
                "estimator matrices N {}x{}, H {}x{}, R {}x{}, M {}x{} disagree with s = {}, {} inputs, {} outputs",
                n.nrows(),
                n.ncols(),
                h.nrows(),
                h.ncols(),
                r.nrows(),
                r.ncols(),
                m.nrows(),
                m.ncols(),
                doc.s,
                doc.n_inputs,
                doc.n_outputs
            )));
        }
        Ok(EstimatorFile { name: doc.name, estimator: Estimator::new(n, h, r, m)?, trace: doc.trace })
    }

    pub fn to_json(&self) -> String {
        let e = &self.estimator;
        let doc = EstimatorDoc {
            name: self.name.clone(),
            s: e.order(),
            n_inputs: e.inputs(),
            n_outputs: e.outputs(),
            n: rows_of(&e.n),
            h: rows_of(&e.h),
            r: rows_of(&e.r),
            m: rows_of(&e.m),
            state_map: self.trace.as_ref().map(|t| t.state_map.clone()),
            trace: self.trace.clone(),
        };
        to_pretty_json(&doc)
    }
}

/// Comma-separated decimals, e.g. `"1,2,3,0"`. The empty string is the empty vector.
pub fn parse_vector(text: &str) -> Result<DVector<f64>> {
    let text = text.trim();
    if text.is_empty() {
        return Ok(DVector::zeros(0));
    }
    let vals = text
        .split(',')
        .enumerate()
        .map(|(i, s)| {
            let s = s.trim();
            match s.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(Error::Parse(format!("entry {} ('{s}') is not a finite number", i + 1))),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DVector::from_vec(vals))
}
