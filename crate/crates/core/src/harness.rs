//! Rate studies: evaluate a measure along a sequence of point sets, fit the
//! log-log slope, and probe normalized floors.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::diaphony::{diaphony_r2, g_norm_q, GSpec, Summation};
use crate::discrepancy::{
    anchored_cube_sup_error, fixed_volume_disc, l2_disc_closed, lq_disc_grid, r_disc, smooth_cube_disc,
    smooth_periodic_disc, star_disc_exact, weighted_sum_closed, weighted_sum_truncated, GridSpec, RDiscMethod,
    SmoothDiscMethod, RDISC_CLOSED_MAX_R,
};
use crate::error::{Error, Result};
use crate::generators::{fibonacci_index, GeneratorSpec};
use crate::kernels::{Bounded, IndexSet, SmoothOrder};
use crate::numeric::Exponent;
use crate::pointset::{CubatureFormula, NormSpec, RateEntry, RateReport};

const RDISC_DEFAULT_GRID: usize = 256;

pub const FLOOR_CAVEAT: &str = "lower-bound constants are non-constructive; the floor statistic is descriptive only";

/// How a smooth discrepancy is evaluated.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodSpec {
    #[default]
    Closed,
    Truncated { level: u64 },
    Grid { z_nodes: Option<usize>, u_nodes: Option<usize> },
    SupRefine { z_nodes: Option<usize>, u_nodes: Option<usize>, depth: u32 },
}

impl MethodSpec {
    fn grid(d: usize, p1: Exponent, z: Option<usize>, u: Option<usize>) -> GridSpec {
        let g = GridSpec::default_for(d, p1);
        GridSpec { z_nodes: z.unwrap_or(g.z_nodes), u_nodes: u.unwrap_or(g.u_nodes) }
    }

    fn with<T>(&self, d: usize, p1: Exponent, f: impl FnOnce(SmoothDiscMethod<'_>) -> Result<T>) -> Result<T> {
        match *self {
            MethodSpec::Closed => f(SmoothDiscMethod::FourierClosedForm),
            MethodSpec::Truncated { level } => {
                let idx = IndexSet::new(d, level)?;
                f(SmoothDiscMethod::FourierTruncated(&idx))
            }
            MethodSpec::Grid { z_nodes, u_nodes } => {
                f(SmoothDiscMethod::GridQuadrature(Self::grid(d, p1, z_nodes, u_nodes)))
            }
            MethodSpec::SupRefine { z_nodes, u_nodes, depth } => f(SmoothDiscMethod::SupRefine {
                grid: Self::grid(d, p1, z_nodes, u_nodes),
                depth,
            }),
        }
    }
}

fn summation<T>(d: usize, level: Option<u64>, f: impl FnOnce(Summation<'_>) -> Result<T>) -> Result<T> {
    match level {
        None => f(Summation::ClosedForm),
        Some(k) => f(Summation::Truncated(&IndexSet::new(d, k)?)),
    }
}

fn one() -> f64 {
    1.0
}

/// A quality measure of a cubature formula.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Measure {
    Star,
    L2,
    Lq { q: Exponent, grid: usize },
    Rdisc { r: u32, q: Exponent, grid: Option<usize> },
    Smooth { r: u32, p1: Exponent, p2: Exponent, #[serde(default)] method: MethodSpec },
    Cube { r: u32, p1: Exponent, p2: Exponent, #[serde(default)] method: MethodSpec },
    Fixedvol { r: u32, v: f64, p1: Exponent, z_nodes: usize },
    Diaphony { r: u32, level: Option<u64> },
    Gnorm { r: u32, alpha: Option<Vec<f64>>, #[serde(default = "one")] c: f64, q: Exponent, grid: usize, level: Option<u64> },
    /// `sum_{k != 0} |Lambda(xi,k)|^2 pr_bar(k)^{-2t}`; a squared quantity.
    #[serde(rename = "lemma31")]
    WeightedSum { t: u32, level: Option<u64> },
    AnchoredCubeSup { grid: usize },
}

impl Measure {
    pub fn name(&self) -> &'static str {
        match self {
            Measure::Star => "star",
            Measure::L2 => "l2",
            Measure::Lq { .. } => "lq",
            Measure::Rdisc { .. } => "rdisc",
            Measure::Smooth { .. } => "smooth",
            Measure::Cube { .. } => "cube",
            Measure::Fixedvol { .. } => "fixedvol",
            Measure::Diaphony { .. } => "diaphony",
            Measure::Gnorm { .. } => "gnorm",
            Measure::WeightedSum { .. } => "lemma31",
            Measure::AnchoredCubeSup { .. } => "anchored_cube_sup",
        }
    }

    /// Name of the evaluation route actually taken.
    pub fn method_name(&self) -> &'static str {
        let trunc = |l: &Option<u64>| if l.is_some() { "fourier_truncated" } else { "fourier_closed_form" };
        match self {
            Measure::Star => "exact_corner_count",
            Measure::L2 => "warnock_closed_form",
            Measure::Lq { .. } | Measure::Fixedvol { .. } | Measure::AnchoredCubeSup { .. } => "grid",
            Measure::Rdisc { r, q, grid } => {
                if grid.is_none() && *r <= RDISC_CLOSED_MAX_R && *q == Exponent::Finite(2.0) {
                    "closed_form"
                } else {
                    "grid"
                }
            }
            Measure::Smooth { method, .. } | Measure::Cube { method, .. } => match method {
                MethodSpec::Closed => "fourier_closed_form",
                MethodSpec::Truncated { .. } => "fourier_truncated",
                MethodSpec::Grid { .. } => "grid_quadrature",
                MethodSpec::SupRefine { .. } => "sup_refine",
            },
            Measure::Diaphony { level, .. } | Measure::WeightedSum { level, .. } | Measure::Gnorm { level, .. } => {
                trunc(level)
            }
        }
    }

    /// Grid sizes used, when the route is grid based.
    pub fn grid_echo(&self, d: usize) -> Option<serde_json::Value> {
        use serde_json::json;
        match self {
            Measure::Lq { grid, .. } | Measure::AnchoredCubeSup { grid } | Measure::Gnorm { grid, .. } => {
                Some(json!({ "nodes": grid }))
            }
            Measure::Rdisc { grid, .. } if self.method_name() == "grid" => {
                Some(json!({ "nodes": grid.unwrap_or(RDISC_DEFAULT_GRID) }))
            }
            Measure::Fixedvol { z_nodes, .. } => Some(json!({ "z_nodes": z_nodes })),
            Measure::Smooth { p1, method, .. } | Measure::Cube { p1, method, .. } => match *method {
                MethodSpec::Grid { z_nodes, u_nodes } | MethodSpec::SupRefine { z_nodes, u_nodes, .. } => {
                    let g = MethodSpec::grid(d, *p1, z_nodes, u_nodes);
                    Some(json!({ "z_nodes": g.z_nodes, "u_nodes": g.u_nodes }))
                }
                MethodSpec::Truncated { level } => Some(json!({ "level": level })),
                MethodSpec::Closed => None,
            },
            Measure::Diaphony { level: Some(l), .. } | Measure::WeightedSum { level: Some(l), .. } => {
                Some(json!({ "level": l }))
            }
            _ => None,
        }
    }

    pub fn evaluate(&self, cf: &CubatureFormula) -> Result<Bounded> {
        let d = cf.d();
        let exact = |v: f64| Bounded { value: v, tail_bound: 0.0 };
        match self {
            Measure::Star => star_disc_exact(cf.points(), false).map(exact),
            Measure::L2 => Ok(exact(l2_disc_closed(cf))),
            Measure::Lq { q, grid } => lq_disc_grid(cf, *q, *grid).map(exact),
            Measure::Rdisc { r, q, grid } => {
                let method = match grid {
                    None if *r <= RDISC_CLOSED_MAX_R && *q == Exponent::Finite(2.0) => RDiscMethod::ClosedForm,
                    None => RDiscMethod::Grid(RDISC_DEFAULT_GRID),
                    Some(n) => RDiscMethod::Grid(*n),
                };
                r_disc(cf, *r, *q, method).map(exact)
            }
            Measure::Smooth { r, p1, p2, method } => {
                let ns = NormSpec::new(*p1, *p2)?;
                method.with(d, *p1, |m| smooth_periodic_disc(cf, *r, &ns, m))
            }
            Measure::Cube { r, p1, p2, method } => {
                let ns = NormSpec::new(*p1, *p2)?;
                method.with(d, *p1, |m| smooth_cube_disc(cf, *r, &ns, m))
            }
            Measure::Fixedvol { r, v, p1, z_nodes } => fixed_volume_disc(cf, *r, *v, *p1, *z_nodes).map(exact),
            Measure::Diaphony { r, level } => summation(d, *level, |s| diaphony_r2(cf, *r, s)),
            Measure::Gnorm { r, alpha, c, q, grid, level } => {
                let alpha = alpha.clone().unwrap_or_else(|| vec![0.0; d]);
                if alpha.len() != d {
                    return Err(Error::DimensionMismatch { expected: d, found: alpha.len() });
                }
                let gs = GSpec::new(SmoothOrder::new(*r, alpha)?, *c, *q)?;
                summation(d, *level, |s| g_norm_q(cf, &gs, s, *grid))
            }
            Measure::WeightedSum { t, level } => match level {
                None => weighted_sum_closed(cf, *t).map(exact),
                Some(k) => weighted_sum_truncated(cf, 2.0 * *t as f64, &IndexSet::new(d, *k)?),
            },
            Measure::AnchoredCubeSup { grid } => Ok(exact(anchored_cube_sup_error(cf, *grid))),
        }
    }
}

/// Point-set family indexed by `m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StudyGenerator {
    /// Seed `seed + m` for each size.
    Random { d: usize, seed: u64 },
    /// `m` must be a perfect `d`-th power.
    Grid { d: usize },
    /// `m` must be a Fibonacci number.
    Fibonacci,
    /// Fixed `a`, or [`korobov_multiplier`].
    Korobov { d: usize, a: Option<u64> },
    /// `m` is the target count.
    Frolov { d: usize, #[serde(default)] clip: bool },
    AnchoredAxis { d: usize },
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn max_partial_quotient(a: u64, m: u64) -> u64 {
    let (mut p, mut q, mut worst) = (m, a, 0);
    while q != 0 {
        worst = worst.max(p / q);
        (p, q) = (q, p % q);
    }
    worst
}

/// Korobov multiplier for size `m`: among `a` coprime to `m`, the smallest largest
/// partial quotient of `m / a`, ties broken by distance to
/// `m (sqrt 5 - 1) / 2`.
pub fn korobov_multiplier(m: u64) -> u64 {
    if m <= 2 {
        return 1;
    }
    let golden = m as f64 * (5f64.sqrt() - 1.0) / 2.0;
    (2..m - 1)
        .filter(|&a| gcd(a, m) == 1)
        .min_by(|&a, &b| {
            let key = |x: u64| (max_partial_quotient(x, m), (x as f64 - golden).abs());
            let (ka, kb) = (key(a), key(b));
            ka.0.cmp(&kb.0).then(ka.1.total_cmp(&kb.1))
        })
        .unwrap_or(1)
}

impl StudyGenerator {
    pub fn spec_for(&self, m: usize) -> Result<GeneratorSpec> {
        Ok(match *self {
            StudyGenerator::Random { d, seed } => GeneratorSpec::Random { m, d, seed: seed.wrapping_add(m as u64) },
            StudyGenerator::Grid { d } => {
                let n = (m as f64).powf(1.0 / d as f64).round() as usize;
                if n.checked_pow(d as u32) != Some(m) {
                    return Err(Error::InvalidParameter(format!("{m} is not a {d}-th power")));
                }
                GeneratorSpec::Grid { n, d }
            }
            StudyGenerator::Fibonacci => GeneratorSpec::Fibonacci {
                n: fibonacci_index(m as u64)
                    .ok_or_else(|| Error::InvalidParameter(format!("{m} is not a Fibonacci number")))?,
            },
            StudyGenerator::Korobov { d, a } => {
                GeneratorSpec::Korobov { m: m as u64, a: a.unwrap_or_else(|| korobov_multiplier(m as u64)), d }
            }
            StudyGenerator::Frolov { d, clip } => GeneratorSpec::Frolov { n_target: m, d, clip },
            StudyGenerator::AnchoredAxis { d } => GeneratorSpec::AnchoredAxis { m, d },
        })
    }
}

/// `value * m^r * (ln m)^{-log_power}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub r: f64,
    pub log_power: f64,
}

impl Normalization {
    pub fn apply(&self, m: usize, value: f64) -> f64 {
        let m = m as f64;
        value * m.powf(self.r) * m.ln().powf(-self.log_power)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub generator: StudyGenerator,
    pub measure: Measure,
    pub m_list: Vec<usize>,
    #[serde(default)]
    pub normalization: Option<Normalization>,
    #[serde(default)]
    pub report: Option<PathBuf>,
    #[serde(default)]
    pub csv: Option<PathBuf>,
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m_list.len() < 4 {
            return Err(Error::InvalidParameter("m_list needs at least 4 sizes".into()));
        }
        if self.m_list[0] == 0 || self.m_list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter("m_list must be positive and strictly increasing".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub max_residual: f64,
}

/// Least squares on `(ln m, ln value)`.
pub fn fit_slope(points: &[(f64, f64)]) -> Result<SlopeFit> {
    if points.len() < 4 {
        return Err(Error::InvalidParameter(format!("need at least 4 points, got {}", points.len())));
    }
    for (i, &(m, v)) in points.iter().enumerate() {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::NonPositiveValue { index: i, value: v });
        }
        if !(m > 0.0) {
            return Err(Error::InvalidParameter(format!("abscissa {m} at index {i} is not positive")));
        }
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter("abscissas must not all coincide".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let max_residual = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).abs()).fold(0.0, f64::max);
    Ok(SlopeFit { slope, intercept, max_residual })
}

/// Measures every size in parallel and assembles the report.
pub fn run_study(cfg: &StudyConfig) -> Result<RateReport> {
    cfg.validate()?;
    let entries = cfg
        .m_list
        .par_iter()
        .map(|&m| {
            let t0 = Instant::now();
            let cf = cfg.generator.spec_for(m)?.generate()?;
            let b = cfg.measure.evaluate(&cf)?;
            Ok(RateEntry {
                m: cf.m(),
                value: b.value,
                tail_bound: b.tail_bound,
                runtime_ms: t0.elapsed().as_secs_f64() * 1e3,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    RateReport::check_entries(&entries)?;
    let fit = fit_slope(&entries.iter().map(|e| (e.m as f64, e.value)).collect::<Vec<_>>())?;
    let floor_statistic = cfg.normalization.map(|n| {
        entries.iter().filter(|e| e.m >= 2).map(|e| n.apply(e.m, e.value)).fold(f64::INFINITY, f64::min)
    });
    let mut echo = cfg.clone();
    echo.report = None;
    echo.csv = None;
    let mut report = RateReport {
        config_echo: serde_json::to_value(&echo).map_err(|e| Error::InvalidParameter(e.to_string()))?,
        entries,
        fitted_slope: fit.slope,
        fitted_intercept: fit.intercept,
        max_residual: fit.max_residual,
        floor_statistic,
        floor_caveat: floor_statistic.map(|_| FLOOR_CAVEAT.to_string()),
        determinism_hash: String::new(),
    };
    report.determinism_hash = determinism_hash(&report);
    Ok(report)
}

/// SHA-256 over the JSON report with every runtime zeroed and the hash blanked.
pub fn determinism_hash(report: &RateReport) -> String {
    let mut r = report.clone();
    r.determinism_hash.clear();
    for e in &mut r.entries {
        e.runtime_ms = 0.0;
    }
    let bytes = serde_json::to_vec(&r).expect("report serializes");
    hex::encode(Sha256::digest(&bytes))
}

pub fn report_csv(report: &RateReport, norm: Option<Normalization>) -> String {
    let mut out = String::from("m,value,tail_bound,runtime_ms,normalized\n");
    for e in &report.entries {
        let n = norm.map(|n| format!("{:.17e}", n.apply(e.m, e.value))).unwrap_or_default();
        out.push_str(&format!("{},{:.17e},{:.17e},{:.3},{}\n", e.m, e.value, e.tail_bound, e.runtime_ms, n));
    }
    out
}

pub fn write_report(report: &RateReport, norm: Option<Normalization>, json: &Path, csv: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(report).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    std::fs::write(json, text + "\n")?;
    if let Some(p) = csv {
        std::fs::write(p, report_csv(report, norm))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::fibonacci;

    #[test]
    fn slope_examples() {
        let pts: Vec<(f64, f64)> = [16.0, 64.0, 256.0, 1024.0].iter().map(|&m: &f64| (m, 3.0 * m.powf(-0.5))).collect();
        let f = fit_slope(&pts).unwrap();
        assert!((f.slope + 0.5).abs() <= 1e-12 && f.max_residual <= 1e-12);
        assert!((f.intercept - 3f64.ln()).abs() <= 1e-12);

        let pts: Vec<(f64, f64)> =
            (8..=20).map(|n| fibonacci(n) as f64).map(|m| (m, m.powi(-2) * m.ln())).collect();
        let s = fit_slope(&pts).unwrap().slope;
        assert!(s > -2.0 && s < -1.8, "{s}");

        let pts: Vec<(f64, f64)> = (1..6).map(|m| (m as f64, 0.7)).collect();
        assert_eq!(fit_slope(&pts).unwrap().slope, 0.0);
    }

    #[test]
    fn slope_rejects_bad_input() {
        let pts = [(1.0, 1.0), (2.0, 0.5), (3.0, 0.0), (4.0, 0.2)];
        assert!(matches!(fit_slope(&pts), Err(Error::NonPositiveValue { index: 2, .. })));
        assert!(matches!(fit_slope(&pts[..3]), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn config_validation() {
        let mut cfg = StudyConfig {
            generator: StudyGenerator::Fibonacci,
            measure: Measure::L2,
            m_list: vec![21, 34, 55],
            normalization: None,
            report: None,
            csv: None,
        };
        assert!(cfg.validate().is_err());
        cfg.m_list = vec![21, 34, 34, 55];
        assert!(cfg.validate().is_err());
        cfg.m_list = vec![21, 34, 55, 89];
        cfg.validate().unwrap();
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<StudyConfig>(&text).unwrap(), cfg);
    }

    #[test]
    fn measure_json_shape() {
        let m: Measure = serde_json::from_str(r#"{"kind":"smooth","r":1,"p1":2,"p2":"inf","method":{"sup_refine":{"z_nodes":64,"u_nodes":8,"depth":1}}}"#).unwrap();
        assert_eq!(m.method_name(), "sup_refine");
        let m: Measure = serde_json::from_str(r#"{"kind":"smooth","r":2,"p1":2,"p2":2}"#).unwrap();
        assert_eq!(m.method_name(), "fourier_closed_form");
    }

    #[test]
    fn korobov_multiplier_examples() {
        for m in [3u64, 64, 100, 512, 4096, 4099] {
            let a = korobov_multiplier(m);
            assert!(a >= 1 && a < m);
            assert_eq!(gcd(a, m), 1);
        }
        // 55 / 34 = [1; 1, 1, 1, 1, 1, 1, 2]
        assert_eq!(max_partial_quotient(34, 55), 2);
        assert_eq!(korobov_multiplier(89), 55);
        assert!(max_partial_quotient(korobov_multiplier(512), 512) <= 3);
    }

    #[test]
    fn study_hash_ignores_runtime() {
        let cfg = StudyConfig {
            generator: StudyGenerator::Random { d: 2, seed: 5 },
            measure: Measure::Diaphony { r: 1, level: None },
            m_list: vec![8, 16, 32, 64],
            normalization: Some(Normalization { r: 1.0, log_power: 0.5 }),
            report: None,
            csv: None,
        };
        let a = run_study(&cfg).unwrap();
        let mut b = run_study(&cfg).unwrap();
        assert_eq!(a.determinism_hash, b.determinism_hash);
        b.entries[0].runtime_ms += 1.0;
        assert_eq!(determinism_hash(&b), a.determinism_hash);
        b.entries[0].value *= 1.0 + 1e-15;
        assert_ne!(determinism_hash(&b), a.determinism_hash);
        assert!(a.floor_statistic.unwrap() > 0.0);
        assert_eq!(report_csv(&a, cfg.normalization).lines().count(), 5);
    }
}
