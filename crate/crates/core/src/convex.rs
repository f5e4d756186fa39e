//! Scalar convex machinery for the nonlinearity `f`.
//!
//! `F(t) = ∫_0^{|t|} f` is even and strictly convex, its conjugate
//! `F*(s) = sup_t { ts - F(t) }` is even, and `(F*)' = f^{-1}` on `s ≥ 0`.
//! Power nonlinearities use closed forms; tabulated ones interpolate `f`
//! linearly between samples, so `F` is piecewise quadratic and every
//! quantity here is exact for that interpolant.

use std::path::Path;

use serde::Serialize;

use crate::{Error, Result};

/// Lower bound on the relative slack a check may show and still pass.
///
/// The power family hits several of these inequalities with equality, so
/// rounding alone produces slacks of order `1e-16`.
pub const SLACK_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum NonlinearityKind {
    /// `f(t) = |t|^{p-2} t`.
    Power {
        p: f64,
    },
    Tabulated(Table),
}

/// Strictly increasing samples of `f` on `[0, t_max]` with `f(0) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    t: Vec<f64>,
    f: Vec<f64>,
    /// `F` at the nodes, by cumulative trapezoid (exact for the interpolant).
    primitive: Vec<f64>,
}

impl Table {
    pub fn new(t: Vec<f64>, f: Vec<f64>) -> Result<Self> {
        if t.len() != f.len() {
            return Err(Error::InvalidNonlinearity(format!(
                "table columns differ in length ({} vs {})",
                t.len(),
                f.len()
            )));
        }
        let (mut t, mut f) = (t, f);
        if t.iter().chain(&f).any(|x| !x.is_finite()) {
            return Err(Error::InvalidNonlinearity(
                "table contains non-finite values".into(),
            ));
        }
        match t.first() {
            None => return Err(Error::InvalidNonlinearity("empty table".into())),
            Some(&t0) if t0 < 0.0 => {
                return Err(Error::InvalidNonlinearity(
                    "table must live on the half-line t >= 0".into(),
                ))
            }
            Some(&t0) if t0 == 0.0 => {
                if f[0] != 0.0 {
                    return Err(Error::InvalidNonlinearity("f(0) must vanish".into()));
                }
            }
            Some(_) => {
                t.insert(0, 0.0);
                f.insert(0, 0.0);
            }
        }
        if t.len() < 2 {
            return Err(Error::InvalidNonlinearity(
                "table needs at least one positive sample".into(),
            ));
        }
        for w in 0..t.len() - 1 {
            if !(t[w + 1] > t[w]) || !(f[w + 1] > f[w]) {
                return Err(Error::InvalidNonlinearity(format!(
                    "table must be strictly increasing in both columns (row {})",
                    w + 1
                )));
            }
        }
        let mut primitive = Vec::with_capacity(t.len());
        primitive.push(0.0);
        for w in 1..t.len() {
            let prev = primitive[w - 1];
            primitive.push(prev + 0.5 * (f[w] + f[w - 1]) * (t[w] - t[w - 1]));
        }
        Ok(Table { t, f, primitive })
    }

    /// Reads a two-column `(t, f(t))` text file. Columns may be separated by
    /// whitespace or commas; `#` comments and one non-numeric header are skipped.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut t = Vec::new();
        let mut f = Vec::new();
        let mut header_seen = false;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .collect();
            let parsed: Option<Vec<f64>> = fields.iter().map(|s| s.parse().ok()).collect();
            match parsed {
                Some(v) if v.len() == 2 => {
                    t.push(v[0]);
                    f.push(v[1]);
                }
                None if !header_seen && t.is_empty() => header_seen = true,
                _ => {
                    return Err(Error::Parse {
                        path: path.to_path_buf(),
                        message: format!("line {}: expected two numeric columns", lineno + 1),
                    })
                }
            }
        }
        Table::new(t, f).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn t_max(&self) -> f64 {
        *self.t.last().unwrap()
    }

    pub fn f_max(&self) -> f64 {
        *self.f.last().unwrap()
    }

    pub fn nodes(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.t.iter().copied().zip(self.f.iter().copied())
    }

    /// Segment `w` with `t[w] <= x < t[w+1]`, clamped to the last segment.
    fn segment(nodes: &[f64], x: f64) -> usize {
        let k = nodes.partition_point(|&v| v <= x);
        k.saturating_sub(1).min(nodes.len() - 2)
    }

    fn slope(&self, w: usize) -> f64 {
        (self.f[w + 1] - self.f[w]) / (self.t[w + 1] - self.t[w])
    }

    /// `f` on `t >= 0`; linear extrapolation past the last node.
    fn f_pos(&self, t: f64) -> f64 {
        let w = Self::segment(&self.t, t);
        self.f[w] + self.slope(w) * (t - self.t[w])
    }

    fn primitive_pos(&self, t: f64) -> f64 {
        let w = Self::segment(&self.t, t);
        let d = t - self.t[w];
        self.primitive[w] + self.f[w] * d + 0.5 * self.slope(w) * d * d
    }

    /// `f^{-1}(s)` for `0 <= s <= f_max`: bisection over the monotone table
    /// locates the segment, where the linear interpolant inverts exactly.
    fn inverse_pos(&self, s: f64) -> Result<f64> {
        if !(0.0..=self.f_max()).contains(&s) {
            return Err(Error::OutOfTableRange {
                value: s,
                max: self.f_max(),
            });
        }
        let w = Self::segment(&self.f, s);
        Ok(self.t[w] + (s - self.f[w]) / self.slope(w))
    }
}

/// The nonlinearity `f` together with the constants of its growth assumptions.
#[derive(Debug, Clone, PartialEq)]
pub struct Nonlinearity {
    pub kind: NonlinearityKind,
    /// Growth exponent: `|f(t)| <= C (1 + |t|^{p-1})`.
    pub p: f64,
    /// Ambrosetti–Rabinowitz constant: `t f(t) >= mu F(t)`.
    pub mu: f64,
    /// `∇₂` constant: `2 ell F(t) <= F(ell t)`.
    pub ell: f64,
    /// The constant `C` of the growth bound.
    pub growth_c: f64,
}

impl Nonlinearity {
    /// `f(t) = |t|^{p-2} t` with `mu = p` and `ell = 2^{1/(p-1)}`.
    pub fn power(p: f64) -> Result<Self> {
        if !(p.is_finite() && p > 2.0) {
            return Err(Error::InvalidNonlinearity(format!(
                "power exponent must exceed 2, got {p}"
            )));
        }
        Ok(Nonlinearity {
            kind: NonlinearityKind::Power { p },
            p,
            mu: p,
            ell: 2f64.powf(1.0 / (p - 1.0)),
            growth_c: 1.0,
        })
    }

    /// Tabulated `f` with user-supplied constants. Only the basic ranges are
    /// validated here; [`Nonlinearity::check_assumptions`] verifies the
    /// inequalities themselves.
    pub fn tabulated(table: Table, p: f64, mu: f64, ell: f64, growth_c: f64) -> Result<Self> {
        if !(p > 2.0 && mu > 2.0 && ell > 1.0 && growth_c > 0.0) {
            return Err(Error::InvalidNonlinearity(format!(
                "need p > 2, mu > 2, ell > 1, C > 0 (got p={p}, mu={mu}, ell={ell}, C={growth_c})"
            )));
        }
        Ok(Nonlinearity {
            kind: NonlinearityKind::Tabulated(table),
            p,
            mu,
            ell,
            growth_c,
        })
    }

    pub fn is_power(&self) -> bool {
        matches!(self.kind, NonlinearityKind::Power { .. })
    }

    /// Conjugate exponent `q = p / (p - 1)`.
    pub fn q(&self) -> f64 {
        self.p / (self.p - 1.0)
    }

    /// Largest `|s|` at which `F*` can be evaluated.
    pub fn conjugate_range(&self) -> f64 {
        match &self.kind {
            NonlinearityKind::Power { .. } => f64::INFINITY,
            NonlinearityKind::Tabulated(tab) => tab.f_max(),
        }
    }

    /// `f`, extended oddly to `t < 0`.
    pub fn f(&self, t: f64) -> f64 {
        match &self.kind {
            NonlinearityKind::Power { p } => t.abs().powf(p - 2.0) * t,
            NonlinearityKind::Tabulated(tab) => tab.f_pos(t.abs()).copysign(t),
        }
    }

    /// `F(t) = ∫_0^{|t|} f`.
    pub fn big_f(&self, t: f64) -> f64 {
        match &self.kind {
            NonlinearityKind::Power { p } => t.abs().powf(*p) / p,
            NonlinearityKind::Tabulated(tab) => tab.primitive_pos(t.abs()),
        }
    }

    /// Fenchel conjugate `F*(s)`.
    pub fn conjugate(&self, s: f64) -> Result<f64> {
        match &self.kind {
            NonlinearityKind::Power { .. } => {
                let q = self.q();
                Ok(s.abs().powf(q) / q)
            }
            NonlinearityKind::Tabulated(tab) => {
                let s = s.abs();
                let t0 = tab.inverse_pos(s)?;
                Ok((s * t0 - tab.primitive_pos(t0)).max(0.0))
            }
        }
    }

    /// `(F*)'(s) = f^{-1}(s)`, odd in `s`.
    pub fn conjugate_derivative(&self, s: f64) -> Result<f64> {
        match &self.kind {
            NonlinearityKind::Power { p } => Ok(s.abs().powf(1.0 / (p - 1.0)).copysign(s)),
            NonlinearityKind::Tabulated(tab) => Ok(tab.inverse_pos(s.abs())?.copysign(s)),
        }
    }

    /// Samples `f`, `F`, `F*` and `(F*)'` on `samples` points of `(0, range]`
    /// and reports the worst relative slack of every assumption.
    pub fn check_assumptions(&self, samples: usize) -> Result<AssumptionReport> {
        if samples < 2 {
            return Err(Error::InvalidArgument("need at least 2 samples".into()));
        }
        let t_max = match &self.kind {
            NonlinearityKind::Power { .. } => 10.0,
            NonlinearityKind::Tabulated(tab) => tab.t_max(),
        };
        let ts: Vec<f64> = (1..=samples)
            .map(|i| t_max * i as f64 / samples as f64)
            .collect();

        let mut monotone = Slack::new();
        let mut prev = self.f(0.0);
        monotone.record(if prev == 0.0 { 0.0 } else { -prev.abs() });
        for &t in &ts {
            let ft = self.f(t);
            monotone.record((ft - prev) / prev.abs().max(1.0));
            prev = ft;
        }
        // Strictness matters: a flat stretch has zero slack but still fails.
        let strictly = ts.windows(2).all(|w| self.f(w[1]) > self.f(w[0])) && self.f(ts[0]) > 0.0;

        let mut growth = Slack::new();
        let mut ar = Slack::new();
        for &t in &ts {
            let bound = self.growth_c * (1.0 + t.powf(self.p - 1.0));
            growth.record((bound - self.f(t).abs()) / bound);
            let tf = t * self.f(t);
            ar.record((tf - self.mu * self.big_f(t)) / tf.abs().max(1e-300));
        }

        let mut nabla2 = Slack::new();
        let t_cap = t_max / self.ell;
        for i in 1..=samples {
            let t = t_cap * i as f64 / samples as f64;
            let rhs = self.big_f(self.ell * t);
            nabla2.record((rhs - 2.0 * self.ell * self.big_f(t)) / rhs.max(1e-300));
        }

        let s_max = match &self.kind {
            NonlinearityKind::Power { .. } => self.f(t_max),
            NonlinearityKind::Tabulated(tab) => tab.f_max(),
        };
        let mut conj_mu = Slack::new();
        let mut doubling_constant = 0.0f64;
        for i in 1..=samples {
            let s = s_max * i as f64 / samples as f64;
            let fs = self.conjugate(s)?;
            let lhs = self.mu / (self.mu - 1.0) * fs;
            conj_mu.record((lhs - s * self.conjugate_derivative(s)?) / lhs.max(1e-300));
            let half = 0.5 * s;
            let fh = self.conjugate(half)?;
            if fh > 0.0 {
                doubling_constant = doubling_constant.max(self.conjugate(s)? / fh);
            }
        }
        let doubling_bound = 2.0 * self.ell;

        Ok(AssumptionReport {
            samples,
            t_max,
            f_increasing: CheckFlag {
                passed: strictly && monotone.worst >= -SLACK_TOL,
                worst_slack: monotone.worst,
            },
            growth: growth.flag(),
            mu_inequality: ar.flag(),
            nabla2: nabla2.flag(),
            conjugate_mu_inequality: conj_mu.flag(),
            doubling_constant,
            doubling_bound,
            doubling: CheckFlag {
                passed: doubling_constant <= doubling_bound * (1.0 + SLACK_TOL),
                worst_slack: (doubling_bound - doubling_constant) / doubling_bound,
            },
        })
    }
}

struct Slack {
    worst: f64,
}

impl Slack {
    fn new() -> Self {
        Slack {
            worst: f64::INFINITY,
        }
    }

    /// Relative slacks within a few ulps are evaluation rounding, so they
    /// count as exact equality.
    fn record(&mut self, v: f64) {
        let v = if v.abs() <= 16.0 * f64::EPSILON {
            0.0
        } else {
            v
        };
        self.worst = self.worst.min(v);
    }

    fn flag(&self) -> CheckFlag {
        CheckFlag {
            passed: self.worst >= -SLACK_TOL,
            worst_slack: self.worst,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CheckFlag {
    pub passed: bool,
    /// Most negative relative slack observed (`>= 0` means the inequality held).
    pub worst_slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionReport {
    pub samples: usize,
    pub t_max: f64,
    pub f_increasing: CheckFlag,
    pub growth: CheckFlag,
    pub mu_inequality: CheckFlag,
    pub nabla2: CheckFlag,
    pub conjugate_mu_inequality: CheckFlag,
    /// `max F*(2s) / F*(s)` over the samples.
    pub doubling_constant: f64,
    /// `2 ell`, the bound the `∇₂` condition implies.
    pub doubling_bound: f64,
    pub doubling: CheckFlag,
}

impl AssumptionReport {
    pub fn all_passed(&self) -> bool {
        [
            self.f_increasing,
            self.growth,
            self.mu_inequality,
            self.nabla2,
            self.conjugate_mu_inequality,
            self.doubling,
        ]
        .iter()
        .all(|c| c.passed)
    }
}
