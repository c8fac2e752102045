use nalgebra::DVector;

use crate::error::{Error, Result};

/// Closed-form scalar signal with analytic derivatives of every order.
#[derive(Debug, Clone, PartialEq)]
pub enum Scalar {
    /// `c0 + c1 t + c2 t^2 + ...`
    Poly(Vec<f64>),
    /// `amp * sin(freq t + phase)`
    Sin { amp: f64, freq: f64, phase: f64 },
    /// `scale * sin(t^2) / t^power`, `power` in `0..=2`.
    Probe { scale: f64, power: u32 },
    Sum(Vec<Scalar>),
}

const SERIES_LIMIT: f64 = 1.5;

fn falling(a: f64, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (a - i as f64))
}

/// Derivative of `t^a` (a integer-valued) of order `k`.
fn power_derivative(a: i64, k: usize, t: f64) -> f64 {
    if a >= 0 && k as i64 > a {
        return 0.0;
    }
    falling(a as f64, k) * t.powi((a - k as i64) as i32)
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Coefficient polynomials with `d^k sin(t^2) = P_k(t) sin(t^2) + Q_k(t) cos(t^2)`.
fn chirp_polys(order: usize) -> Vec<(Vec<f64>, Vec<f64>)> {
    let mut out = vec![(vec![1.0], vec![0.0])];
    for _ in 0..order {
        let (p, q) = out.last().unwrap().clone();
        let deriv = |c: &[f64]| -> Vec<f64> { c.iter().enumerate().skip(1).map(|(i, v)| i as f64 * v).collect() };
        let shift2 = |c: &[f64]| -> Vec<f64> {
            let mut v = vec![0.0];
            v.extend(c.iter().map(|x| 2.0 * x));
            v
        };
        let add = |a: Vec<f64>, b: Vec<f64>, sign: f64| -> Vec<f64> {
            let n = a.len().max(b.len());
            (0..n).map(|i| a.get(i).copied().unwrap_or(0.0) + sign * b.get(i).copied().unwrap_or(0.0)).collect()
        };
        let np = add(deriv(&p), shift2(&q), -1.0);
        let nq = add(deriv(&q), shift2(&p), 1.0);
        out.push((np, nq));
    }
    out
}

fn horner(c: &[f64], t: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, v| acc * t + v)
}

fn probe_derivative(power: u32, k: usize, t: f64) -> f64 {
    let s = power as i64;
    if t.abs() <= SERIES_LIMIT {
        // sin(t^2)/t^s = sum_j (-1)^j t^(4j+2-s) / (2j+1)!
        let mut acc = 0.0;
        let mut fact = 1.0;
        for j in 0..40usize {
            if j > 0 {
                fact *= ((2 * j) * (2 * j + 1)) as f64;
            }
            let a = 4 * j as i64 + 2 - s;
            let term = power_derivative(a, k, t) / fact;
            acc += if j % 2 == 0 { term } else { -term };
            if j > 4 && term.abs() < 1e-300 {
                break;
            }
        }
        return acc;
    }
    let polys = chirp_polys(k);
    let (sn, cs) = (t * t).sin_cos();
    let mut acc = 0.0;
    for (i, (p, q)) in polys.iter().enumerate() {
        let g = horner(p, t) * sn + horner(q, t) * cs;
        let h = falling(-(s as f64), k - i) * t.powi(-(s as i32) - (k - i) as i32);
        acc += binomial(k, i) * g * h;
    }
    acc
}

impl Scalar {
    pub fn zero() -> Self {
        Scalar::Poly(vec![])
    }

    pub fn value(&self, t: f64) -> f64 {
        self.derivative(t, 0)
    }

    pub fn derivative(&self, t: f64, k: usize) -> f64 {
        match self {
            Scalar::Poly(c) => c
                .iter()
                .enumerate()
                .skip(k)
                .map(|(i, v)| v * falling(i as f64, k) * t.powi((i - k) as i32))
                .sum(),
            Scalar::Sin { amp, freq, phase } => {
                amp * freq.powi(k as i32) * (freq * t + phase + k as f64 * std::f64::consts::FRAC_PI_2).sin()
            }
            Scalar::Probe { scale, power } => scale * probe_derivative(*power, k, t),
            Scalar::Sum(parts) => parts.iter().map(|p| p.derivative(t, k)).sum(),
        }
    }

    fn scaled(self, c: f64) -> Scalar {
        match self {
            Scalar::Poly(v) => Scalar::Poly(v.into_iter().map(|x| x * c).collect()),
            Scalar::Sin { amp, freq, phase } => Scalar::Sin { amp: amp * c, freq, phase },
            Scalar::Probe { scale, power } => Scalar::Probe { scale: scale * c, power },
            Scalar::Sum(parts) => Scalar::Sum(parts.into_iter().map(|p| p.scaled(c)).collect()),
        }
    }
}

/// Vector-valued input `u(t)`, one closed-form signal per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct InputSignal {
    pub channels: Vec<Scalar>,
}

impl InputSignal {
    pub fn new(channels: Vec<Scalar>) -> Self {
        InputSignal { channels }
    }

    pub fn zero(l: usize) -> Self {
        InputSignal { channels: vec![Scalar::zero(); l] }
    }

    pub fn dim(&self) -> usize {
        self.channels.len()
    }

    pub fn value(&self, t: f64) -> DVector<f64> {
        self.derivative(t, 0)
    }

    pub fn derivative(&self, t: f64, k: usize) -> DVector<f64> {
        DVector::from_iterator(self.channels.len(), self.channels.iter().map(|c| c.derivative(t, k)))
    }

    /// Highest derivative order available; every closed form here is smooth.
    pub fn smoothness(&self) -> usize {
        usize::MAX
    }

    /// Parse a channel list such as `"2*t + sin(1,3,0); probe(1)"`.
    ///
    /// Each channel is a sum of terms; a term is a product of numbers and at
    /// most one atom among `t`, `t^k`, `poly(c0,..)`, `sin(a,w,phi)`,
    /// `cos(a,w,phi)`, `probe(s)`.
    pub fn parse(text: &str) -> Result<Self> {
        let channels = text
            .split(';')
            .map(|c| Parser { s: c.as_bytes(), pos: 0 }.channel())
            .collect::<Result<Vec<_>>>()?;
        Ok(InputSignal { channels })
    }
}

struct Parser<'a> {
    s: &'a [u8],
    pos: usize,
}

fn perr(msg: impl Into<String>) -> Error {
    Error::Parse(msg.into())
}

impl Parser<'_> {
    fn skip_ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.s.get(self.pos).copied()
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(perr(format!("expected '{}' at offset {}", c as char, self.pos)))
        }
    }

    fn channel(mut self) -> Result<Scalar> {
        let mut parts = Vec::new();
        let mut sign = 1.0;
        if self.peek() == Some(b'-') {
            self.pos += 1;
            sign = -1.0;
        } else if self.peek() == Some(b'+') {
            self.pos += 1;
        }
        loop {
            parts.push(self.term()?.scaled(sign));
            match self.peek() {
                Some(b'+') => sign = 1.0,
                Some(b'-') => sign = -1.0,
                None => break,
                Some(c) => return Err(perr(format!("unexpected '{}' at offset {}", c as char, self.pos))),
            }
            self.pos += 1;
        }
        Ok(if parts.len() == 1 { parts.pop().unwrap() } else { Scalar::Sum(parts) })
    }

    fn term(&mut self) -> Result<Scalar> {
        let mut coef = 1.0;
        let mut atom: Option<Scalar> = None;
        loop {
            match self.factor()? {
                Factor::Number(v) => coef *= v,
                Factor::Atom(a) => {
                    if atom.replace(a).is_some() {
                        return Err(perr("products of two signals are not supported"));
                    }
                }
            }
            if self.peek() == Some(b'*') {
                self.pos += 1;
            } else {
                break;
            }
        }
        Ok(atom.unwrap_or(Scalar::Poly(vec![1.0])).scaled(coef))
    }

    fn number(&mut self) -> Result<f64> {
        self.skip_ws();
        let start = self.pos;
        let s = self.s;
        let mut i = self.pos;
        if i < s.len() && (s[i] == b'-' || s[i] == b'+') {
            i += 1;
        }
        while i < s.len() && (s[i].is_ascii_digit() || s[i] == b'.') {
            i += 1;
        }
        if i < s.len() && (s[i] == b'e' || s[i] == b'E') {
            let mut j = i + 1;
            if j < s.len() && (s[j] == b'-' || s[j] == b'+') {
                j += 1;
            }
            if j < s.len() && s[j].is_ascii_digit() {
                while j < s.len() && s[j].is_ascii_digit() {
                    j += 1;
                }
                i = j;
            }
        }
        let text = std::str::from_utf8(&s[start..i]).map_err(|_| perr("invalid utf-8"))?;
        let v: f64 = text.parse().map_err(|_| perr(format!("invalid number '{text}' at offset {start}")))?;
        if !v.is_finite() {
            return Err(perr(format!("non-finite number at offset {start}")));
        }
        self.pos = i;
        Ok(v)
    }

    fn args(&mut self) -> Result<Vec<f64>> {
        self.expect(b'(')?;
        let mut out = Vec::new();
        if self.peek() == Some(b')') {
            self.pos += 1;
            return Ok(out);
        }
        loop {
            out.push(self.number()?);
            match self.peek() {
                Some(b',') => self.pos += 1,
                Some(b')') => {
                    self.pos += 1;
                    return Ok(out);
                }
                _ => return Err(perr(format!("expected ',' or ')' at offset {}", self.pos))),
            }
        }
    }

    fn factor(&mut self) -> Result<Factor> {
        match self.peek() {
            Some(c) if c.is_ascii_digit() || c == b'.' => Ok(Factor::Number(self.number()?)),
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while self.pos < self.s.len() && self.s[self.pos].is_ascii_alphabetic() {
                    self.pos += 1;
                }
                let name = std::str::from_utf8(&self.s[start..self.pos]).unwrap_or("");
                match name {
                    "t" => {
                        if self.peek() == Some(b'^') {
                            self.pos += 1;
                            let k = self.number()?;
                            if k.fract() != 0.0 || !(0.0..=64.0).contains(&k) {
                                return Err(perr("exponent of t must be an integer in 0..=64"));
                            }
                            let mut c = vec![0.0; k as usize + 1];
                            c[k as usize] = 1.0;
                            Ok(Factor::Atom(Scalar::Poly(c)))
                        } else {
                            Ok(Factor::Atom(Scalar::Poly(vec![0.0, 1.0])))
                        }
                    }
                    "poly" => {
                        let c = self.args()?;
                        if c.len() > 65 {
                            return Err(perr("polynomial degree above 64"));
                        }
                        Ok(Factor::Atom(Scalar::Poly(c)))
                    }
                    "sin" | "cos" => {
                        let a = self.args()?;
                        if a.len() != 3 {
                            return Err(perr(format!("{name} takes (amplitude, frequency, phase)")));
                        }
                        let shift = if name == "cos" { std::f64::consts::FRAC_PI_2 } else { 0.0 };
                        Ok(Factor::Atom(Scalar::Sin { amp: a[0], freq: a[1], phase: a[2] + shift }))
                    }
                    "probe" => {
                        let a = self.args()?;
                        if a.len() != 1 || a[0].fract() != 0.0 || !(0.0..=2.0).contains(&a[0]) {
                            return Err(perr("probe takes one integer power in 0..=2"));
                        }
                        Ok(Factor::Atom(Scalar::Probe { scale: 1.0, power: a[0] as u32 }))
                    }
                    other => Err(perr(format!("unknown signal '{other}' at offset {start}"))),
                }
            }
            Some(c) => Err(perr(format!("unexpected '{}' at offset {}", c as char, self.pos))),
            None => Err(perr("empty term")),
        }
    }
}

enum Factor {
    Number(f64),
    Atom(Scalar),
}
