//! Point sets, cubature weights, norm selectors and the point-set file format.
//!
//! A point-set file is UTF-8 text with one knot per line: `d` comma-separated
//! decimal coordinates, optionally followed by `;w` giving that knot's weight.
//! Lines starting with `#` and blank lines are ignored. When no line carries a
//! weight the formula is the equal-weight (QMC) rule with weights `1/m`.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{frac, fsum, Exponent};

/// `m` knots in `[0,1)^d`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    d: usize,
    coords: Vec<f64>,
}

impl PointSet {
    /// Builds a point set from rows, checking shape and range.
    pub fn new(d: usize, rows: &[Vec<f64>]) -> Result<Self> {
        validate(d, rows)
    }

    /// Builds a point set from a flat row-major buffer.
    pub fn from_flat(d: usize, coords: Vec<f64>) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidParameter("dimension must be at least 1".into()));
        }
        if coords.is_empty() || coords.len() % d != 0 {
            return Err(Error::DimensionMismatch { expected: d, found: coords.len() % d });
        }
        for (i, &x) in coords.iter().enumerate() {
            check_coord(i / d, i % d, x)?;
        }
        Ok(Self { d, coords })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn m(&self) -> usize {
        self.coords.len() / self.d
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.d..(i + 1) * self.d]
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.d)
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// Coordinates of dimension `j` across all knots.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.iter().map(|p| p[j]).collect()
    }

    /// Common shift `x -> {x + s}` of every knot.
    pub fn shifted(&self, s: &[f64]) -> Result<Self> {
        if s.len() != self.d {
            return Err(Error::DimensionMismatch { expected: self.d, found: s.len() });
        }
        let coords = self
            .coords
            .iter()
            .enumerate()
            .map(|(i, &x)| frac(x + s[i % self.d]))
            .collect();
        Ok(Self { d: self.d, coords })
    }
}

fn check_coord(row: usize, col: usize, x: f64) -> Result<()> {
    if !(0.0..1.0).contains(&x) || !x.is_finite() {
        return Err(Error::CoordinateOutOfRange { row, col, value: x });
    }
    Ok(())
}

/// Checks that every row has length `d` and every coordinate lies in `[0,1)`.
pub fn validate(d: usize, rows: &[Vec<f64>]) -> Result<PointSet> {
    if d == 0 {
        return Err(Error::InvalidParameter("dimension must be at least 1".into()));
    }
    if rows.is_empty() {
        return Err(Error::InvalidParameter("point set must be non-empty".into()));
    }
    let mut coords = Vec::with_capacity(rows.len() * d);
    for (r, row) in rows.iter().enumerate() {
        if row.len() != d {
            return Err(Error::DimensionMismatch { expected: d, found: row.len() });
        }
        for (c, &x) in row.iter().enumerate() {
            check_coord(r, c, x)?;
            coords.push(x);
        }
    }
    Ok(PointSet { d, coords })
}

/// Cubature weights with their cached budget `B = sum |lambda|`.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights {
    lambdas: Vec<f64>,
    budget: f64,
}

impl Weights {
    pub fn new(lambdas: Vec<f64>) -> Result<Self> {
        if let Some(i) = lambdas.iter().position(|l| !l.is_finite()) {
            return Err(Error::InvalidParameter(format!("weight {i} is not finite")));
        }
        let budget = fsum(lambdas.iter().map(|l| l.abs()));
        Ok(Self { lambdas, budget })
    }

    pub fn equal(m: usize) -> Self {
        let w = 1.0 / m as f64;
        Self { lambdas: vec![w; m], budget: fsum(std::iter::repeat(w).take(m)) }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    /// `sum lambda`, the exponential sum at frequency zero.
    pub fn total(&self) -> f64 {
        fsum(self.lambdas.iter().copied())
    }

    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }
}

/// Knots plus weights: `Q(f) = sum_mu lambda_mu f(xi^mu)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CubatureFormula {
    pts: PointSet,
    wts: Weights,
}

impl CubatureFormula {
    pub fn new(pts: PointSet, wts: Weights) -> Result<Self> {
        if wts.len() != pts.m() {
            return Err(Error::DimensionMismatch { expected: pts.m(), found: wts.len() });
        }
        Ok(Self { pts, wts })
    }

    /// Equal weights `1/m`.
    pub fn qmc(pts: PointSet) -> Self {
        let wts = Weights::equal(pts.m());
        Self { pts, wts }
    }

    pub fn points(&self) -> &PointSet {
        &self.pts
    }

    pub fn weights(&self) -> &Weights {
        &self.wts
    }

    pub fn lambdas(&self) -> &[f64] {
        self.wts.as_slice()
    }

    pub fn m(&self) -> usize {
        self.pts.m()
    }

    pub fn d(&self) -> usize {
        self.pts.d()
    }

    pub fn budget(&self) -> f64 {
        self.wts.budget()
    }

    pub fn lambda_zero(&self) -> f64 {
        self.wts.total()
    }

    pub fn is_qmc(&self) -> bool {
        let w = 1.0 / self.m() as f64;
        self.lambdas().iter().all(|&l| l == w)
    }

    pub fn shifted(&self, s: &[f64]) -> Result<Self> {
        Ok(Self { pts: self.pts.shifted(s)?, wts: self.wts.clone() })
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        let wts = Weights::new(self.lambdas().iter().map(|l| l * c).collect())?;
        Ok(Self { pts: self.pts.clone(), wts })
    }
}

/// Inner `z`-norm and outer `u`-norm exponents of the smooth periodic discrepancy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormSpec {
    p1: Exponent,
    p2: Exponent,
}

impl NormSpec {
    /// Requires `p1 > 1` and `p2 >= 1`.
    pub fn new(p1: Exponent, p2: Exponent) -> Result<Self> {
        if p1.as_f64() <= 1.0 || p1.as_f64().is_nan() {
            return Err(Error::InvalidParameter(format!("p1 must exceed 1, got {p1}")));
        }
        if p2.as_f64() < 1.0 || p2.as_f64().is_nan() {
            return Err(Error::InvalidParameter(format!("p2 must be at least 1, got {p2}")));
        }
        Ok(Self { p1, p2 })
    }

    pub fn l2() -> Self {
        Self { p1: Exponent::Finite(2.0), p2: Exponent::Finite(2.0) }
    }

    pub fn p1(&self) -> Exponent {
        self.p1
    }

    pub fn p2(&self) -> Exponent {
        self.p2
    }

    pub fn is_l2(&self) -> bool {
        self.p1 == Exponent::Finite(2.0) && self.p2 == Exponent::Finite(2.0)
    }
}

/// One measured point of a rate study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateEntry {
    pub m: usize,
    pub value: f64,
    pub tail_bound: f64,
    pub runtime_ms: f64,
}

/// Per-`m` measure values with the fitted log-log exponent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub config_echo: serde_json::Value,
    pub entries: Vec<RateEntry>,
    pub fitted_slope: f64,
    pub fitted_intercept: f64,
    pub max_residual: f64,
    /// `min_m value * m^r * (ln m)^{-log_power}` when a normalization is configured.
    pub floor_statistic: Option<f64>,
    pub floor_caveat: Option<String>,
    /// SHA-256 of the report with runtimes zeroed and this field empty.
    pub determinism_hash: String,
}

impl RateReport {
    /// Entries must be strictly increasing in `m` with positive values.
    pub fn check_entries(entries: &[RateEntry]) -> Result<()> {
        for (i, e) in entries.iter().enumerate() {
            if !(e.value > 0.0) {
                return Err(Error::NonPositiveValue { index: i, value: e.value });
            }
            if i > 0 && entries[i - 1].m >= e.m {
                return Err(Error::InvalidParameter("rate entries must have increasing m".into()));
            }
        }
        Ok(())
    }
}

fn parse_f64(tok: &str, line: usize) -> Result<f64> {
    tok.trim()
        .parse::<f64>()
        .map_err(|e| Error::Parse { line, msg: format!("{:?}: {e}", tok.trim()) })
}

/// Parses point-set text (see module docs).
pub fn parse_pointset(text: &str) -> Result<CubatureFormula> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut weights: Vec<Option<f64>> = Vec::new();
    let mut d: Option<usize> = None;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (coord_part, weight_part) = match line.split_once(';') {
            Some((c, w)) => (c, Some(w)),
            None => (line, None),
        };
        let row = coord_part
            .split(',')
            .map(|t| parse_f64(t, line_no))
            .collect::<Result<Vec<_>>>()?;
        match d {
            None => d = Some(row.len()),
            Some(d) if d != row.len() => {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("expected {d} coordinates, found {}", row.len()),
                })
            }
            _ => {}
        }
        for (c, &x) in row.iter().enumerate() {
            if !(0.0..1.0).contains(&x) {
                return Err(Error::CoordinateOutOfRange { row: rows.len(), col: c, value: x });
            }
        }
        weights.push(weight_part.map(|w| parse_f64(w, line_no)).transpose()?);
        rows.push(row);
    }
    let d = d.ok_or(Error::Parse { line: 0, msg: "no points".into() })?;
    let pts = validate(d, &rows)?;
    let given = weights.iter().filter(|w| w.is_some()).count();
    if given == 0 {
        return Ok(CubatureFormula::qmc(pts));
    }
    if given != weights.len() {
        let line = weights.iter().position(|w| w.is_none()).unwrap_or(0) + 1;
        return Err(Error::Parse {
            line,
            msg: "weights must be given on every line or on none".into(),
        });
    }
    let wts = Weights::new(weights.into_iter().map(|w| w.unwrap_or_default()).collect())?;
    CubatureFormula::new(pts, wts)
}

/// Renders a formula with 17 significant digits; equal-weight formulas omit weights.
pub fn format_pointset(cf: &CubatureFormula) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# d={} m={}", cf.d(), cf.m());
    let with_weights = !cf.is_qmc();
    for (p, w) in cf.points().iter().zip(cf.lambdas()) {
        let row: Vec<String> = p.iter().map(|x| format!("{x:.16e}")).collect();
        out.push_str(&row.join(","));
        if with_weights {
            let _ = write!(out, ";{w:.16e}");
        }
        out.push('\n');
    }
    out
}

pub fn load_pointset<P: AsRef<Path>>(path: P) -> Result<CubatureFormula> {
    let text = std::fs::read_to_string(path)?;
    parse_pointset(&text)
}

pub fn save_pointset<P: AsRef<Path>>(cf: &CubatureFormula, path: P) -> Result<()> {
    std::fs::write(path, format_pointset(cf))?;
    Ok(())
}
