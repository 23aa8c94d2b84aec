//! The incremental greedy algorithm IA(eps) over kernel dictionaries, producing
//! equal-weight knot sets.
//!
//! Everything is discretized: dictionary elements `K(x, .)` are sampled on a
//! midpoint grid, norms are grid `L_s` norms, and knots come from a finite pool.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{f_closed_1d, f_series_1d, SmoothOrder};
use crate::numeric::{frac, fsum, grid_norm, midpoints, Exponent};
use crate::pointset::{CubatureFormula, PointSet};

/// Where candidate knots come from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PoolSpec {
    /// Lattice `i / n` with `n = round(size^{1/d})` per axis.
    Grid { size: usize },
    /// Seeded uniform points.
    Random { size: usize, seed: u64 },
}

impl PoolSpec {
    pub fn points(&self, d: usize) -> Result<Vec<Vec<f64>>> {
        match *self {
            PoolSpec::Grid { size } => {
                let n = (size as f64).powf(1.0 / d as f64).round().max(1.0) as usize;
                let total = n.pow(d as u32);
                Ok((0..total)
                    .map(|c| {
                        let mut o = c;
                        let mut p = vec![0.0; d];
                        for j in (0..d).rev() {
                            p[j] = (o % n) as f64 / n as f64;
                            o /= n;
                        }
                        p
                    })
                    .collect())
            }
            PoolSpec::Random { size, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                Ok((0..size).map(|_| (0..d).map(|_| rng.gen::<f64>()).collect()).collect())
            }
        }
    }
}

/// Built-in kernels `K(x, y)`.
#[derive(Debug, Clone, PartialEq)]
pub enum KernelKind {
    /// `F_{r,alpha}(x - y)`.
    Translation(SmoothOrder),
    /// `chi_E(x - y)` for `E` a union of half-open boxes `[lo, hi)` on the torus.
    Indicator(Vec<(Vec<f64>, Vec<f64>)>),
}

/// Univariate `F_{r,alpha}(t)`: closed form where available, otherwise a long cosine sum.
pub fn translation_1d(t: f64, r: u32, alpha: f64) -> Result<f64> {
    if let Some(v) = f_closed_1d(t, r, alpha) {
        return Ok(v);
    }
    if r == 1 {
        let s = match alpha.rem_euclid(4.0) {
            x if x == 0.0 => 1.0,
            x if x == 2.0 => -1.0,
            _ => return Err(Error::InvalidParameter("r = 1 needs alpha in {0, 2} mod 4".into())),
        };
        return Ok(1.0 - s * 2.0 * (2.0 * (PI * t).sin().abs()).ln());
    }
    Ok(f_series_1d(t, r, alpha, 1 << 16))
}

fn union_measure(boxes: &[(Vec<f64>, Vec<f64>)], d: usize) -> f64 {
    let cuts: Vec<Vec<f64>> = (0..d)
        .map(|j| {
            let mut c = vec![0.0, 1.0];
            for (lo, hi) in boxes {
                c.push(lo[j]);
                c.push(hi[j]);
            }
            c.sort_by(f64::total_cmp);
            c.dedup();
            c
        })
        .collect();
    let sizes: Vec<usize> = cuts.iter().map(|c| c.len() - 1).collect();
    let total: usize = sizes.iter().product();
    let mut acc = Vec::with_capacity(total);
    for c in 0..total {
        let mut o = c;
        let mut vol = 1.0;
        let mut mid = vec![0.0; d];
        for j in 0..d {
            let i = o % sizes[j];
            o /= sizes[j];
            vol *= cuts[j][i + 1] - cuts[j][i];
            mid[j] = 0.5 * (cuts[j][i] + cuts[j][i + 1]);
        }
        if in_union(boxes, &mid) {
            acc.push(vol);
        }
    }
    fsum(acc)
}

fn in_union(boxes: &[(Vec<f64>, Vec<f64>)], t: &[f64]) -> bool {
    boxes.iter().any(|(lo, hi)| t.iter().zip(lo.iter().zip(hi)).all(|(&x, (&a, &b))| a <= x && x < b))
}

/// A sampled, normalized dictionary with its target.
#[derive(Debug, Clone)]
pub struct KernelDict {
    d: usize,
    pool: Vec<Vec<f64>>,
    /// `rows[i]` is the normalized element for `pool[i]` on the grid.
    rows: Vec<Vec<f64>>,
    target: Vec<f64>,
    cell: f64,
    s: Exponent,
    scale: f64,
}

impl KernelDict {
    /// Samples `kind` on a midpoint grid with `grid_n` nodes per axis and normalizes by
    /// the largest grid `L_s` norm over the pool.
    pub fn build(kind: &KernelKind, d: usize, pool: &PoolSpec, grid_n: usize, s: f64) -> Result<Self> {
        if !(s > 1.0) {
            return Err(Error::UnsupportedQ(s));
        }
        if grid_n < 2 {
            return Err(Error::InvalidParameter("grid needs at least 2 nodes per axis".into()));
        }
        let nodes = midpoints(0.0, 1.0, grid_n);
        let total = grid_n
            .checked_pow(d as u32)
            .filter(|&t| t <= 1 << 24)
            .ok_or_else(|| Error::TooLarge(format!("{grid_n}^{d} grid nodes")))?;
        let grid: Vec<Vec<f64>> = (0..total)
            .map(|c| {
                let mut o = c;
                let mut y = vec![0.0; d];
                for j in (0..d).rev() {
                    y[j] = nodes[o % grid_n];
                    o /= grid_n;
                }
                y
            })
            .collect();
        let pool_pts = pool.points(d)?;
        if pool_pts.len() * total > 200_000_000 {
            return Err(Error::TooLarge(format!("dictionary of {} x {total} samples", pool_pts.len())));
        }
        let (raw, mass): (Vec<Vec<f64>>, f64) = match kind {
            KernelKind::Translation(so) => {
                if so.d() != d {
                    return Err(Error::DimensionMismatch { expected: d, found: so.d() });
                }
                translation_1d(0.3, so.r, so.alpha[0])?;
                let rows = pool_pts
                    .par_iter()
                    .map(|x| {
                        grid.iter()
                            .map(|y| {
                                (0..d)
                                    .map(|j| translation_1d(x[j] - y[j], so.r, so.alpha[j]).unwrap_or(f64::NAN))
                                    .product()
                            })
                            .collect()
                    })
                    .collect();
                (rows, 1.0)
            }
            KernelKind::Indicator(boxes) => {
                if boxes.is_empty() || boxes.iter().any(|(lo, hi)| lo.len() != d || hi.len() != d) {
                    return Err(Error::InvalidParameter("indicator needs boxes of matching dimension".into()));
                }
                let rows = pool_pts
                    .par_iter()
                    .map(|x| {
                        grid.iter()
                            .map(|y| {
                                let t: Vec<f64> = x.iter().zip(y).map(|(a, b)| frac(a - b)).collect();
                                if in_union(boxes, &t) {
                                    1.0
                                } else {
                                    0.0
                                }
                            })
                            .collect()
                    })
                    .collect();
                (rows, union_measure(boxes, d))
            }
        };
        let target = vec![mass; total];
        Self::from_rows(pool_pts, raw, target, grid_n.pow(d as u32), s)
    }

    /// Dictionary from explicit samples on a uniform grid of `n_cells` cells; rows and
    /// target are divided by the largest row norm.
    pub fn from_rows(
        pool: Vec<Vec<f64>>,
        rows: Vec<Vec<f64>>,
        target: Vec<f64>,
        n_cells: usize,
        s: f64,
    ) -> Result<Self> {
        if pool.is_empty() || pool.len() != rows.len() {
            return Err(Error::InvalidParameter("pool and rows must be non-empty and equally long".into()));
        }
        if rows.iter().any(|r| r.len() != target.len()) || target.len() != n_cells {
            return Err(Error::InvalidParameter("every row must have one value per grid cell".into()));
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("dictionary contains non-finite samples".into()));
        }
        let d = pool[0].len();
        let cell = 1.0 / n_cells as f64;
        let s = Exponent::Finite(s);
        let scale = rows.iter().map(|r| grid_norm(r, cell, s)).fold(0.0, f64::max);
        if scale == 0.0 {
            return Err(Error::ZeroElement);
        }
        let rows = rows.into_iter().map(|r| r.into_iter().map(|v| v / scale).collect()).collect();
        let target = target.into_iter().map(|v| v / scale).collect();
        Ok(Self { d, pool, rows, target, cell, s, scale })
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn pool(&self) -> &[Vec<f64>] {
        &self.pool
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }

    pub fn element(&self, i: usize) -> &[f64] {
        &self.rows[i]
    }

    pub fn norm(&self, g: &[f64]) -> f64 {
        grid_norm(g, self.cell, self.s)
    }

    fn exponent(&self) -> f64 {
        self.s.finite().unwrap_or(2.0)
    }
}

/// Step-size schedule `eps_n = beta gamma^{1/q} n^{-1/p}` for the ambient `L_s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleParams {
    pub beta: f64,
    /// `q = min(s, 2)`.
    pub smoothness_q: f64,
    pub gamma: f64,
    /// `p = q / (q - 1)`.
    pub rate_p: f64,
}

impl ScheduleParams {
    pub fn new(beta: f64, s: f64) -> Result<Self> {
        if !(beta > 0.0) {
            return Err(Error::InvalidParameter(format!("beta must be positive, got {beta}")));
        }
        if !(s > 1.0 && s.is_finite()) {
            return Err(Error::UnsupportedQ(s));
        }
        let q = s.min(2.0);
        let gamma = if s <= 2.0 { 1.0 / s } else { (s - 1.0) / 2.0 };
        Ok(Self { beta, smoothness_q: q, gamma, rate_p: q / (q - 1.0) })
    }

    pub fn eps(&self, n: usize) -> f64 {
        self.beta * self.gamma.powf(1.0 / self.smoothness_q) * (n as f64).powf(-1.0 / self.rate_p)
    }
}

/// `gamma^{1/q} m^{-1/p}`, the guaranteed rate without its constant.
pub fn rate_guarantee(sp: &ScheduleParams, m: usize) -> f64 {
    sp.gamma.powf(1.0 / sp.smoothness_q) * (m as f64).powf(-1.0 / sp.rate_p)
}

/// The norming functional of `g` in grid `L_q`, as a density against the grid.
#[derive(Debug, Clone)]
pub struct NormingFunctional {
    density: Vec<f64>,
}

impl NormingFunctional {
    pub fn apply(&self, h: &[f64]) -> f64 {
        fsum(self.density.iter().zip(h).map(|(a, b)| a * b))
    }
}

/// `h -> ||g||^{1-q} sum_i w |g_i|^{q-1} sign(g_i) h_i`.
pub fn norming_functional(g: &[f64], w: f64, q: f64) -> Result<NormingFunctional> {
    if !(q > 1.0 && q.is_finite()) {
        return Err(Error::UnsupportedQ(q));
    }
    let norm = grid_norm(g, w, Exponent::Finite(q));
    if norm == 0.0 {
        return Err(Error::ZeroElement);
    }
    let c = norm.powf(1.0 - q);
    let density = g.iter().map(|&v| w * c * v.abs().powf(q - 1.0) * v.signum()).collect();
    Ok(NormingFunctional { density })
}

/// One IA step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub n: usize,
    pub chosen_index: usize,
    pub chosen_x: Vec<f64>,
    pub functional_value: f64,
    pub eps: f64,
    pub residual_norm: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ResidualTrace {
    pub steps: Vec<TraceStep>,
    /// Set when a residual vanished and the run stopped early.
    pub exact_at: Option<usize>,
}

impl ResidualTrace {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,chosen_index,chosen_x,functional_value,eps,residual_norm\n");
        for s in &self.steps {
            let x: Vec<String> = s.chosen_x.iter().map(|v| format!("{v:.17e}")).collect();
            out.push_str(&format!(
                "{},{},{},{:.17e},{:.17e},{:.17e}\n",
                s.n,
                s.chosen_index,
                x.join(" "),
                s.functional_value,
                s.eps,
                s.residual_norm
            ));
        }
        out
    }
}

/// Output of [`ia_run`].
#[derive(Debug, Clone)]
pub struct IaOutcome {
    pub formula: CubatureFormula,
    pub trace: ResidualTrace,
    /// `G_m`, the running mean of the chosen elements.
    pub approximant: Vec<f64>,
    /// `f_m = f - G_m` on the grid (normalized units).
    pub residual: Vec<f64>,
}

/// Runs IA(eps) for up to `m_max` steps.
pub fn ia_run(dict: &KernelDict, sp: &ScheduleParams, m_max: usize) -> Result<IaOutcome> {
    if m_max == 0 {
        return Err(Error::InvalidParameter("m must be at least 1".into()));
    }
    let q = dict.exponent();
    let f = dict.target();
    let mut g = vec![0.0; f.len()];
    let mut resid = f.to_vec();
    let mut trace = ResidualTrace::default();
    let mut chosen: Vec<usize> = Vec::with_capacity(m_max);
    for n in 1..=m_max {
        let func = match norming_functional(&resid, dict.cell, q) {
            Ok(func) => func,
            Err(Error::ZeroElement) if n > 1 => {
                trace.exact_at = Some(n - 1);
                break;
            }
            Err(e) => return Err(e),
        };
        let base = func.apply(f);
        let scores: Vec<f64> = dict.rows.par_iter().map(|row| func.apply(row) - base).collect();
        let (best_i, best) = scores
            .iter()
            .enumerate()
            .fold((0usize, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
        let eps = sp.eps(n);
        if best < -eps {
            return Err(Error::ScheduleViolated { n, best, eps });
        }
        let phi = &dict.rows[best_i];
        let a = 1.0 - 1.0 / n as f64;
        for ((gi, ri), (&p, &t)) in g.iter_mut().zip(resid.iter_mut()).zip(phi.iter().zip(f)) {
            *gi = a * *gi + p / n as f64;
            *ri = t - *gi;
        }
        chosen.push(best_i);
        trace.steps.push(TraceStep {
            n,
            chosen_index: best_i,
            chosen_x: dict.pool[best_i].clone(),
            functional_value: best,
            eps,
            residual_norm: dict.norm(&resid),
        });
        if resid.iter().all(|&v| v == 0.0) {
            trace.exact_at = Some(n);
            break;
        }
    }
    let rows: Vec<Vec<f64>> = chosen.iter().map(|&i| dict.pool[i].clone()).collect();
    let formula = CubatureFormula::qmc(PointSet::new(dict.d, &rows)?);
    Ok(IaOutcome { formula, trace, approximant: g, residual: resid })
}
