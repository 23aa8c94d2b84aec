//! Discrepancy measures: the classical star and `L_q` discrepancies, the
//! `r`-discrepancy, and the periodic `r`-smooth discrepancy with its cube and
//! fixed-volume variants.
//!
//! The smooth discrepancy integrates the error field
//! `delta(z,u) = sum_mu lambda_mu tilde h^r(xi^mu, z, u) - prod_j u_j^r`
//! over shifts `z` in the torus and shapes `u` in `(0, 1/2]^d` (Lebesgue measure,
//! not normalized). For `p1 = p2 = 2` it is computed without truncation from the
//! pairwise kernel `kappa(x) = sum_k I(k) e^{2 pi i k x}`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{
    b_r_eval, exp_sums, hat_1d_periodic, hat_sq_u_coeff, hat_sq_u_integral, hat_sq_u_zero, hat_fourier,
    BoxPairKernel, Bounded, IndexSet,
};
use crate::numeric::{factorial, binomial, fsum, grid_norm, midpoints, CompensatedSum, Exponent};
use crate::pointset::{CubatureFormula, NormSpec, PointSet};
use crate::quadrature::{adaptive_gk, GaussLegendre};

/// Complexity guard for [`star_disc_exact`].
pub const STAR_MAX_D: usize = 3;
pub const STAR_MAX_M: usize = 256;

/// Largest `r` with the closed-form `q = 2` r-discrepancy.
pub const RDISC_CLOSED_MAX_R: u32 = 4;

/// One sample of the error field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorFieldSample {
    pub z: Vec<f64>,
    pub u: Vec<f64>,
    pub delta: f64,
}

/// Node counts per axis for grid quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub z_nodes: usize,
    pub u_nodes: usize,
}

impl GridSpec {
    /// Defaults sized for desk runs; `p1 = 2` uses the factorized path and affords finer grids.
    pub fn default_for(d: usize, p1: Exponent) -> Self {
        let l2 = p1 == Exponent::Finite(2.0);
        let (z_nodes, u_nodes) = match (d, l2) {
            (1, true) => (4096, 1024),
            (2, true) => (4096, 512),
            (_, true) => (1024, 48),
            (1, false) => (2048, 512),
            (2, false) => (128, 32),
            (_, false) => (24, 8),
        };
        Self { z_nodes, u_nodes }
    }
}

/// How to evaluate a smooth discrepancy.
#[derive(Debug, Clone, Copy)]
pub enum SmoothDiscMethod<'a> {
    /// Full Fourier series, summed in closed form; requires `p1 = p2 = 2`.
    FourierClosedForm,
    /// Fourier series truncated to a hyperbolic cross, with a certified tail; requires `p1 = p2 = 2`.
    FourierTruncated(&'a IndexSet),
    /// Midpoint quadrature over `z` and `u` grids.
    GridQuadrature(GridSpec),
    /// Grid quadrature followed by `depth` local refinement passes of every sup.
    SupRefine { grid: GridSpec, depth: u32 },
}

impl SmoothDiscMethod<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            SmoothDiscMethod::FourierClosedForm => "fourier_closed_form",
            SmoothDiscMethod::FourierTruncated(_) => "fourier_truncated",
            SmoothDiscMethod::GridQuadrature(_) => "grid_quadrature",
            SmoothDiscMethod::SupRefine { .. } => "sup_refine",
        }
    }

    fn check(&self, ns: &NormSpec) -> Result<()> {
        let ok = match self {
            SmoothDiscMethod::FourierClosedForm | SmoothDiscMethod::FourierTruncated(_) => ns.is_l2(),
            SmoothDiscMethod::GridQuadrature(_) => true,
            SmoothDiscMethod::SupRefine { .. } => ns.p1().is_infinite() || ns.p2().is_infinite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::IncompatibleMethod {
                method: self.name().into(),
                p1: ns.p1().to_string(),
                p2: ns.p2().to_string(),
            })
        }
    }
}

/// `sum_{mu,nu} lambda_mu lambda_nu [prod_j (c0 + c1 k(xi^mu_j - xi^nu_j)) - c0^d]`.
///
/// The subtraction of `c0^d` is carried inside the product recurrence, so no
/// cancellation against the constant term occurs.
pub fn pair_product_sum<K: Fn(f64) -> f64 + Sync>(cf: &CubatureFormula, c0: f64, c1: f64, k: K) -> f64 {
    let pts = cf.points();
    let lam = cf.lambdas();
    let term = |a: &[f64], b: &[f64]| {
        let (mut p, mut q) = (1.0, 0.0);
        for (x, y) in a.iter().zip(b) {
            let kv = c1 * k(x - y);
            q = q * (c0 + kv) + p * kv;
            p *= c0;
        }
        q
    };
    let rows: Vec<f64> = (0..cf.m())
        .into_par_iter()
        .map(|mu| {
            let a = pts.point(mu);
            let mut s = CompensatedSum::new();
            for nu in 0..mu {
                s.add(2.0 * lam[nu] * term(a, pts.point(nu)));
            }
            s.add(lam[mu] * term(a, a));
            lam[mu] * s.value()
        })
        .collect();
    fsum(rows)
}

/// Exact star discrepancy `sup_b |prod b_j - #{xi in [0,b)}/m|` by critical-corner enumeration.
///
/// Refuses `d > 3` or `m > 256` unless `allow_large` is set.
pub fn star_disc_exact(pts: &PointSet, allow_large: bool) -> Result<f64> {
    let (d, m) = (pts.d(), pts.m());
    if !allow_large && (d > STAR_MAX_D || m > STAR_MAX_M) {
        return Err(Error::TooLarge(format!(
            "star discrepancy with d={d}, m={m} (limits d<={STAR_MAX_D}, m<={STAR_MAX_M})"
        )));
    }
    if m == 0 {
        return Ok(1.0);
    }
    let grids: Vec<Vec<f64>> = (0..d)
        .map(|j| {
            let mut g = pts.column(j);
            g.push(1.0);
            g.sort_by(f64::total_cmp);
            g.dedup();
            g
        })
        .collect();
    let dims: Vec<usize> = grids.iter().map(Vec::len).collect();
    let total: usize = dims
        .iter()
        .try_fold(1usize, |a, &n| a.checked_mul(n))
        .filter(|&t| t <= 400_000_000)
        .ok_or_else(|| Error::TooLarge("star discrepancy corner table".into()))?;
    let strides: Vec<usize> = (0..d).map(|j| dims[j + 1..].iter().product()).collect();
    let mut table = vec![0u32; total];
    for p in pts.iter() {
        let mut off = 0;
        for j in 0..d {
            let r = grids[j].partition_point(|&g| g < p[j]);
            off += r * strides[j];
        }
        table[off] += 1;
    }
    // closed counts: cumulative along each axis
    for j in 0..d {
        let s = strides[j];
        for off in 0..total {
            if (off / s) % dims[j] > 0 {
                table[off] += table[off - s];
            }
        }
    }
    let inv_m = 1.0 / m as f64;
    let best = (0..total)
        .into_par_iter()
        .map(|off| {
            let mut vol = 1.0;
            let mut open_off = 0;
            let mut has_open = true;
            for j in 0..d {
                let a = (off / strides[j]) % dims[j];
                vol *= grids[j][a];
                if a == 0 {
                    has_open = false;
                } else {
                    open_off += (a - 1) * strides[j];
                }
            }
            let closed = table[off] as f64 * inv_m;
            let open = if has_open { table[open_off] as f64 * inv_m } else { 0.0 };
            (vol - open).max(closed - vol)
        })
        .reduce(|| 0.0, f64::max);
    Ok(best)
}

/// Anchored error `sum_mu lambda_mu chi(xi^mu < b) - prod_j b_j`.
pub fn anchored_error(cf: &CubatureFormula, b: &[f64]) -> f64 {
    let inside = fsum(
        cf.points()
            .iter()
            .zip(cf.lambdas())
            .filter(|(p, _)| p.iter().zip(b).all(|(x, y)| x < y))
            .map(|(_, &l)| l),
    );
    inside - b.iter().product::<f64>()
}

/// Closed-form `L_2` norm over `b` of the anchored error.
pub fn l2_disc_closed(cf: &CubatureFormula) -> f64 {
    let d = cf.d() as i32;
    let pair = pair_sum_symmetric(cf, |a, b| a.iter().zip(b).map(|(x, y)| 1.0 - x.max(*y)).product());
    let cross = fsum(
        cf.points()
            .iter()
            .zip(cf.lambdas())
            .map(|(p, l)| l * p.iter().map(|x| (1.0 - x * x) / 2.0).product::<f64>()),
    );
    let v = fsum([3f64.powi(-d), -2.0 * cross, pair]);
    if v < 0.0 {
        if v < -1e-14 {
            log::warn!("negative radicand {v:e} in closed-form L2 discrepancy");
        }
        return 0.0;
    }
    v.sqrt()
}

fn pair_sum_symmetric<K: Fn(&[f64], &[f64]) -> f64 + Sync>(cf: &CubatureFormula, k: K) -> f64 {
    let pts = cf.points();
    let lam = cf.lambdas();
    let rows: Vec<f64> = (0..cf.m())
        .into_par_iter()
        .map(|mu| {
            let a = pts.point(mu);
            let mut s = CompensatedSum::new();
            for nu in 0..mu {
                s.add(2.0 * lam[nu] * k(a, pts.point(nu)));
            }
            s.add(lam[mu] * k(a, a));
            lam[mu] * s.value()
        })
        .collect();
    fsum(rows)
}

fn check_q(q: Exponent, allow_one: bool) -> Result<()> {
    match q {
        Exponent::Infinity => Ok(()),
        Exponent::Finite(v) if v > 1.0 || (allow_one && v == 1.0) => Ok(()),
        Exponent::Finite(v) => Err(Error::UnsupportedQ(v)),
    }
}

/// `L_q` norm of the anchored error on a midpoint `b`-grid with `n` nodes per axis.
///
/// For `q = inf` the grid max is refined once around its argmax.
pub fn lq_disc_grid(cf: &CubatureFormula, q: Exponent, n: usize) -> Result<f64> {
    check_q(q, true)?;
    if n < 16 {
        return Err(Error::InvalidParameter(format!("need at least 16 nodes per axis, got {n}")));
    }
    let d = cf.d();
    if n.checked_pow(d as u32).filter(|&t| t <= 1 << 31).is_none() {
        return Err(Error::TooLarge(format!("{n}^{d} grid nodes")));
    }
    let nodes = midpoints(0.0, 1.0, n);
    // bin = number of nodes <= x, so x < b_i exactly when i >= bin
    let mut by_first: Vec<Vec<(Vec<usize>, f64)>> = vec![Vec::new(); n];
    for (p, &l) in cf.points().iter().zip(cf.lambdas()) {
        let bins: Vec<usize> = p.iter().map(|&x| nodes.partition_point(|&b| b <= x)).collect();
        if bins.iter().all(|&b| b < n) {
            by_first[bins[0]].push((bins[1..].to_vec(), l));
        }
    }
    let rest = n.pow(d as u32 - 1);
    let mut raw = vec![0.0; rest];
    let mut pre = vec![0.0; rest];
    let mut acc = CompensatedSum::new();
    let mut best = (-1.0, 0usize);
    let qv = q.finite();
    for i0 in 0..n {
        for (bins, l) in &by_first[i0] {
            let off = bins.iter().fold(0, |o, &b| o * n + b);
            raw[off] += l;
        }
        pre.copy_from_slice(&raw);
        for j in 0..d - 1 {
            let s = n.pow((d - 2 - j) as u32);
            for off in 0..rest {
                if (off / s) % n > 0 {
                    pre[off] += pre[off - s];
                }
            }
        }
        for (off, &w) in pre.iter().enumerate() {
            let mut vol = nodes[i0];
            let mut o = off;
            for _ in 0..d - 1 {
                vol *= nodes[o % n];
                o /= n;
            }
            let e = (w - vol).abs();
            match qv {
                Some(qq) if qq == 2.0 => acc.add(e * e),
                Some(qq) if qq == 1.0 => acc.add(e),
                Some(qq) => acc.add(e.powf(qq)),
                None => {
                    if e > best.0 {
                        best = (e, i0 * rest + off);
                    }
                }
            }
        }
    }
    let cell = (n as f64).powi(-(d as i32));
    Ok(match qv {
        Some(qq) => (cell * acc.value()).powf(1.0 / qq),
        None => {
            // offsets store the last axis least significant
            let mut centre = Vec::with_capacity(d);
            let mut o = best.1;
            for _ in 0..d {
                centre.push(nodes[o % n]);
                o /= n;
            }
            centre.reverse();
            let h = 1.0 / n as f64;
            let refined = local_max(&centre, h, 16, |b| {
                if b.iter().all(|x| (0.0..=1.0).contains(x)) {
                    anchored_error(cf, b).abs()
                } else {
                    0.0
                }
            });
            best.0.max(refined)
        }
    })
}

/// Max of `f` over a `(2 s + 1)^d` lattice covering `centre +- h` per axis.
fn local_max<F: Fn(&[f64]) -> f64>(centre: &[f64], h: f64, s: usize, f: F) -> f64 {
    let d = centre.len();
    let side = 2 * s + 1;
    let count = side.pow(d as u32);
    let mut best = f64::NEG_INFINITY;
    let mut x = vec![0.0; d];
    for c in 0..count {
        let mut o = c;
        for j in 0..d {
            let t = (o % side) as f64 - s as f64;
            x[j] = centre[j] + t * h / s as f64;
            o /= side;
        }
        best = best.max(f(&x));
    }
    best
}

/// How to evaluate [`r_disc`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RDiscMethod {
    /// Polynomial antiderivatives; `q = 2` and `r <= 4` only.
    ClosedForm,
    /// Midpoint `y`-grid with the given nodes per axis.
    Grid(usize),
}

/// The `r`-discrepancy `|| sum_mu lambda_mu B_r(xi^mu, y) - prod_j y_j^r / r! ||_q`.
pub fn r_disc(cf: &CubatureFormula, r: u32, q: Exponent, method: RDiscMethod) -> Result<f64> {
    check_q(q, false)?;
    if r == 0 {
        return Err(Error::InvalidParameter("r must be at least 1".into()));
    }
    match method {
        RDiscMethod::ClosedForm => {
            if q != Exponent::Finite(2.0) || r > RDISC_CLOSED_MAX_R {
                return Err(Error::IncompatibleMethod {
                    method: "closed_form".into(),
                    p1: q.to_string(),
                    p2: format!("r={r}"),
                });
            }
            Ok(r_disc_l2_closed(cf, r))
        }
        RDiscMethod::Grid(n) => {
            if n < 16 {
                return Err(Error::InvalidParameter(format!("need at least 16 nodes per axis, got {n}")));
            }
            let d = cf.d();
            let total = n
                .checked_pow(d as u32)
                .filter(|&t| t <= 1 << 28)
                .ok_or_else(|| Error::TooLarge(format!("{n}^{d} grid nodes")))?;
            let nodes = midpoints(0.0, 1.0, n);
            let rf = factorial(r);
            let vals: Vec<f64> = (0..total)
                .into_par_iter()
                .map_init(
                    || vec![0.0; d],
                    |y, c| {
                        let mut o = c;
                        for yj in y.iter_mut() {
                            *yj = nodes[o % n];
                            o /= n;
                        }
                        let s = fsum(
                            cf.points().iter().zip(cf.lambdas()).map(|(p, l)| l * b_r_eval(p, y, r)),
                        );
                        s - y.iter().map(|v| v.powi(r as i32) / rf).product::<f64>()
                    },
                )
                .collect();
            Ok(grid_norm(&vals, (n as f64).powi(-(d as i32)), q))
        }
    }
}

fn r_disc_l2_closed(cf: &CubatureFormula, r: u32) -> f64 {
    let ri = r as i32;
    let f1 = factorial(r - 1);
    let pair1 = |a: f64, b: f64| {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let delta = hi - lo;
        let l = 1.0 - hi;
        let mut s = 0.0;
        for i in 0..r {
            s += binomial(r - 1, i) * delta.powi(ri - 1 - i as i32) * l.powi(i as i32 + ri) / (i + r) as f64;
        }
        s / (f1 * f1)
    };
    let cross1 = |a: f64| {
        let l = 1.0 - a;
        let mut s = 0.0;
        for i in 0..=r {
            s += binomial(r, i) * a.powi(ri - i as i32) * l.powi(i as i32 + ri) / (i + r) as f64;
        }
        s / (factorial(r) * f1)
    };
    let d = cf.d() as i32;
    let pair = pair_sum_symmetric(cf, |a, b| a.iter().zip(b).map(|(&x, &y)| pair1(x, y)).product());
    let cross = fsum(
        cf.points()
            .iter()
            .zip(cf.lambdas())
            .map(|(p, l)| l * p.iter().map(|&x| cross1(x)).product::<f64>()),
    );
    let c = (1.0 / (factorial(r).powi(2) * (2 * r + 1) as f64)).powi(d);
    fsum([pair, -2.0 * cross, c]).max(0.0).sqrt()
}

/// Pointwise error field `delta(z, u)`.
pub fn error_field(cf: &CubatureFormula, r: u32, z: &[f64], u: &[f64]) -> ErrorFieldSample {
    let delta = fsum(cf.points().iter().zip(cf.lambdas()).map(|(p, l)| {
        l * p
            .iter()
            .zip(z.iter().zip(u))
            .map(|(&x, (&zj, &uj))| hat_1d_periodic(x - zj, uj, r))
            .product::<f64>()
    })) - u.iter().map(|v| v.powi(r as i32)).product::<f64>();
    ErrorFieldSample { z: z.to_vec(), u: u.to_vec(), delta }
}

/// Exact `||delta(., u)||_2` over the torus, from the autocorrelation `h^r * h^r = h^{2r}`.
pub fn error_field_l2(cf: &CubatureFormula, r: u32, u: &[f64]) -> f64 {
    let lam0 = cf.lambda_zero();
    let pair = pair_sum_symmetric(cf, |a, b| {
        a.iter()
            .zip(b)
            .zip(u)
            .map(|((x, y), &uj)| hat_1d_periodic(x - y, uj, 2 * r))
            .product()
    });
    let c: f64 = u.iter().map(|v| v.powi(2 * r as i32)).product();
    (pair + (1.0 - 2.0 * lam0) * c).max(0.0).sqrt()
}

fn closed_form_r_guard(r: u32) -> Result<()> {
    if r == 0 || r > crate::numeric::MAX_CLOSED_FORM_ORDER {
        return Err(Error::InvalidParameter(format!(
            "closed form supports 1 <= r <= {}; use a truncated or grid method",
            crate::numeric::MAX_CLOSED_FORM_ORDER
        )));
    }
    Ok(())
}

/// Periodic `r`-smooth `L_{p1,p2}` discrepancy.
pub fn smooth_periodic_disc(
    cf: &CubatureFormula,
    r: u32,
    ns: &NormSpec,
    method: SmoothDiscMethod<'_>,
) -> Result<Bounded> {
    method.check(ns)?;
    if r == 0 {
        return Err(Error::InvalidParameter("r must be at least 1".into()));
    }
    let d = cf.d();
    let lam0 = cf.lambda_zero();
    match method {
        SmoothDiscMethod::FourierClosedForm => {
            closed_form_r_guard(r)?;
            let ker = BoxPairKernel::new(r)?;
            let z = crate::numeric::EvenZetaKernel::new(r);
            let i0 = ker.zero_term();
            let s = pair_product_sum(cf, i0, hat_sq_u_coeff(r), |x| z.eval(x));
            let sq = s + (lam0 - 1.0).powi(2) * i0.powi(d as i32);
            Ok(Bounded { value: sq.max(0.0).sqrt(), tail_bound: 0.0 })
        }
        SmoothDiscMethod::FourierTruncated(idx) => {
            let table = exp_sums(cf, idx)?;
            let mut acc = CompensatedSum::new();
            for (k, v) in table.iter() {
                if k.iter().all(|&x| x == 0) {
                    continue;
                }
                acc.add(v.norm_sqr() * k.iter().map(|&kj| hat_sq_u_integral(kj, r)).product::<f64>());
            }
            acc.add((lam0 - 1.0).powi(2) * hat_sq_u_zero(r).powi(d as i32));
            let cmax = hat_sq_u_coeff(r).max(hat_sq_u_zero(r));
            let tail = cf.budget().powi(2) * cmax.powi(d as i32) * idx.tail_bound(r);
            certify(acc.value(), tail)
        }
        SmoothDiscMethod::GridQuadrature(grid) => {
            grid_disc(cf, r, ns, grid, ShapeFamily::Product, 0).map(exact)
        }
        SmoothDiscMethod::SupRefine { grid, depth } => {
            grid_disc(cf, r, ns, grid, ShapeFamily::Product, depth.max(1)).map(exact)
        }
    }
}

/// Smooth discrepancy over cubes: `u_1 = ... = u_d = u` with scalar `u in (0, 1/2]`.
pub fn smooth_cube_disc(
    cf: &CubatureFormula,
    r: u32,
    ns: &NormSpec,
    method: SmoothDiscMethod<'_>,
) -> Result<Bounded> {
    method.check(ns)?;
    if r == 0 {
        return Err(Error::InvalidParameter("r must be at least 1".into()));
    }
    let d = cf.d();
    let lam0 = cf.lambda_zero();
    match method {
        SmoothDiscMethod::FourierClosedForm => {
            let sq = cube_l2_exact(cf, r);
            Ok(Bounded { value: sq.max(0.0).sqrt(), tail_bound: 0.0 })
        }
        SmoothDiscMethod::FourierTruncated(idx) => {
            let table = exp_sums(cf, idx)?;
            let mut acc = CompensatedSum::new();
            for (k, v) in table.iter() {
                let w = if k.iter().all(|&x| x == 0) { (lam0 - 1.0).powi(2) } else { v.norm_sqr() };
                if w == 0.0 {
                    continue;
                }
                acc.add(w * cube_j(k, r));
            }
            // |hat h(k_j, u)|^2 <= 4^{-r} max(|k_j|,1)^{-2r} for u <= 1/2
            let tail = cf.budget().powi(2) * 0.5 * 4f64.powi(-(r as i32) * d as i32) * idx.tail_bound(r);
            certify(acc.value(), tail)
        }
        SmoothDiscMethod::GridQuadrature(grid) => grid_disc(cf, r, ns, grid, ShapeFamily::Diagonal, 0).map(exact),
        SmoothDiscMethod::SupRefine { grid, depth } => {
            grid_disc(cf, r, ns, grid, ShapeFamily::Diagonal, depth.max(1)).map(exact)
        }
    }
}

fn exact(v: f64) -> Bounded {
    Bounded { value: v, tail_bound: 0.0 }
}

/// Square root of a truncated sum of squares with the tail turned into a bound on the root.
fn certify(partial: f64, tail: f64) -> Result<Bounded> {
    if !(tail <= 0.1 * partial) {
        return Err(Error::TruncationTooCoarse { tail, sum: partial });
    }
    let v = partial.max(0.0).sqrt();
    Ok(Bounded { value: v, tail_bound: (partial + tail).sqrt() - v })
}

/// `J(k) = int_0^{1/2} prod_j hat_fourier(k_j, u, r)^2 du`.
pub fn cube_j(k: &[i64], r: u32) -> f64 {
    let f = |u: f64| k.iter().map(|&kj| hat_fourier(kj, u, r).powi(2)).product::<f64>();
    let kmax = k.iter().map(|x| x.unsigned_abs()).max().unwrap_or(0).max(1);
    // split at the zeros of the fastest sine to keep GK panels smooth
    let pieces = (kmax as usize).min(4096);
    let h = 0.5 / pieces as f64;
    fsum((0..pieces).map(|i| adaptive_gk(f, i as f64 * h, (i + 1) as f64 * h, 1e-15, 200).0))
}

/// Exact squared cube discrepancy by piecewise Gauss-Legendre in `u`.
fn cube_l2_exact(cf: &CubatureFormula, r: u32) -> f64 {
    let d = cf.d();
    let deg = d * (2 * r as usize - 1);
    let gl = GaussLegendre::new(deg / 2 + 1);
    let reach = r as f64 / 2.0;
    let pair = pair_sum_symmetric(cf, |a, b| {
        let mut cuts = vec![0.0, 0.5];
        for (x, y) in a.iter().zip(b) {
            let t0 = crate::numeric::wrap_centered(x - y);
            let nmax = reach.ceil() as i64 + 1;
            for n in -nmax..=nmax {
                let t = (t0 + n as f64).abs();
                if t >= reach || t == 0.0 {
                    continue;
                }
                for i in 1..=r {
                    let u = t / i as f64;
                    if u > 0.0 && u < 0.5 {
                        cuts.push(u);
                    }
                }
            }
        }
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let mut s = 0.0;
        for w in cuts.windows(2) {
            s += gl.integrate(w[0], w[1], |u| {
                a.iter().zip(b).map(|(x, y)| hat_1d_periodic(x - y, u, 2 * r)).product::<f64>()
            });
        }
        s
    });
    let n = 2 * r as i32 * d as i32;
    let c = 0.5f64.powi(n + 1) / (n + 1) as f64;
    pair + (1.0 - 2.0 * cf.lambda_zero()) * c
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ShapeFamily {
    /// All `u` in the product grid.
    Product,
    /// `u_1 = ... = u_d`.
    Diagonal,
}

/// Per-axis hat samples `H[mu][z]` for one `u` value.
fn hat_matrix(col: &[f64], u: f64, r: u32, z: &[f64]) -> Vec<f64> {
    let mut h = Vec::with_capacity(col.len() * z.len());
    for &x in col {
        h.extend(z.iter().map(|&zz| hat_1d_periodic(x - zz, u, r)));
    }
    h
}

fn grid_disc(
    cf: &CubatureFormula,
    r: u32,
    ns: &NormSpec,
    grid: GridSpec,
    family: ShapeFamily,
    depth: u32,
) -> Result<f64> {
    let d = cf.d();
    let m = cf.m();
    if grid.z_nodes < 2 || grid.u_nodes < 1 {
        return Err(Error::InvalidParameter("grid needs z_nodes >= 2 and u_nodes >= 1".into()));
    }
    let zs = midpoints(0.0, 1.0, grid.z_nodes);
    let us = midpoints(0.0, 0.5, grid.u_nodes);
    let nu = us.len();
    let shapes: usize = match family {
        ShapeFamily::Product => nu
            .checked_pow(d as u32)
            .filter(|&s| s <= 1 << 26)
            .ok_or_else(|| Error::TooLarge(format!("{nu}^{d} shape nodes")))?,
        ShapeFamily::Diagonal => nu,
    };
    let shape_u = |s: usize| -> Vec<usize> {
        match family {
            ShapeFamily::Product => {
                let mut o = s;
                (0..d)
                    .map(|_| {
                        let i = o % nu;
                        o /= nu;
                        i
                    })
                    .collect()
            }
            ShapeFamily::Diagonal => vec![s; d],
        }
    };
    let u_weight = match family {
        ShapeFamily::Product => (0.5 / nu as f64).powi(d as i32),
        ShapeFamily::Diagonal => 0.5 / nu as f64,
    };
    let hz = 1.0 / zs.len() as f64;
    let lam = cf.lambdas();
    let cols: Vec<Vec<f64>> = (0..d).map(|j| cf.points().column(j)).collect();
    let l2_inner = ns.p1() == Exponent::Finite(2.0);

    let inner: Vec<f64> = if l2_inner {
        let entries = d * nu * m * m;
        if entries > 60_000_000 {
            return Err(Error::TooLarge(format!("Gram tables with {entries} entries")));
        }
        // gram[j][iu] = (G (m*m), M (m))
        let gram: Vec<Vec<(Vec<f64>, Vec<f64>)>> = (0..d)
            .map(|j| {
                (0..nu)
                    .into_par_iter()
                    .map(|iu| {
                        let h = hat_matrix(&cols[j], us[iu], r, &zs);
                        let nz = zs.len();
                        let mut g = vec![0.0; m * m];
                        let mut mean = vec![0.0; m];
                        for a in 0..m {
                            let ha = &h[a * nz..(a + 1) * nz];
                            mean[a] = hz * ha.iter().sum::<f64>();
                            for b in 0..=a {
                                let hb = &h[b * nz..(b + 1) * nz];
                                let v = hz * ha.iter().zip(hb).map(|(x, y)| x * y).sum::<f64>();
                                g[a * m + b] = v;
                                g[b * m + a] = v;
                            }
                        }
                        (g, mean)
                    })
                    .collect()
            })
            .collect();
        (0..shapes)
            .into_par_iter()
            .map(|s| {
                let iu = shape_u(s);
                let c: f64 = iu.iter().map(|&i| us[i].powi(r as i32)).product();
                let mut pair = CompensatedSum::new();
                for a in 0..m {
                    for b in 0..m {
                        let mut p = lam[a] * lam[b];
                        for j in 0..d {
                            p *= gram[j][iu[j]].0[a * m + b];
                        }
                        pair.add(p);
                    }
                }
                let mut cross = CompensatedSum::new();
                for a in 0..m {
                    let mut p = lam[a];
                    for j in 0..d {
                        p *= gram[j][iu[j]].1[a];
                    }
                    cross.add(p);
                }
                fsum([pair.value(), -2.0 * c * cross.value(), c * c]).max(0.0).sqrt()
            })
            .collect()
    } else {
        let nz = zs.len();
        let zcount = nz
            .checked_pow(d as u32)
            .filter(|&t| t <= 1 << 24)
            .ok_or_else(|| Error::TooLarge(format!("{nz}^{d} shift nodes")))?;
        let entries = d * nu * m * nz;
        if entries > 100_000_000 {
            return Err(Error::TooLarge(format!("hat tables with {entries} entries")));
        }
        let tables: Vec<Vec<Vec<f64>>> =
            (0..d).map(|j| (0..nu).into_par_iter().map(|iu| hat_matrix(&cols[j], us[iu], r, &zs)).collect()).collect();
        let p1 = ns.p1();
        (0..shapes)
            .into_par_iter()
            .map(|s| {
                let iu = shape_u(s);
                let c: f64 = iu.iter().map(|&i| us[i].powi(r as i32)).product();
                let mut vals = Vec::with_capacity(zcount);
                let mut zi = vec![0usize; d];
                for t in 0..zcount {
                    let mut o = t;
                    for zj in zi.iter_mut() {
                        *zj = o % nz;
                        o /= nz;
                    }
                    let mut acc = CompensatedSum::new();
                    for a in 0..m {
                        let mut p = lam[a];
                        for j in 0..d {
                            p *= tables[j][iu[j]][a * nz + zi[j]];
                        }
                        acc.add(p);
                    }
                    vals.push(acc.value() - c);
                }
                let mut v = grid_norm(&vals, (hz).powi(d as i32), p1);
                if depth > 0 && p1.is_infinite() {
                    let (arg, _) = vals
                        .iter()
                        .enumerate()
                        .fold((0, -1.0), |b, (i, x)| if x.abs() > b.1 { (i, x.abs()) } else { b });
                    let mut centre: Vec<f64> = Vec::with_capacity(d);
                    let mut o = arg;
                    for _ in 0..d {
                        centre.push(zs[o % nz]);
                        o /= nz;
                    }
                    let u: Vec<f64> = iu.iter().map(|&i| us[i]).collect();
                    v = v.max(refine_z(cf, r, &u, centre, hz, depth));
                }
                v
            })
            .collect()
    };

    let p2 = ns.p2();
    let mut out = grid_norm(&inner, u_weight, p2);
    if depth > 0 && p2.is_infinite() {
        let (arg, _) = inner
            .iter()
            .enumerate()
            .fold((0, -1.0), |b, (i, x)| if *x > b.1 { (i, *x) } else { b });
        let mut centre: Vec<f64> = shape_u(arg).iter().map(|&i| us[i]).collect();
        let mut h = 0.5 / nu as f64;
        let inner_at = |u: &[f64]| -> f64 {
            if l2_inner {
                grid_inner_l2(cf, r, u, &zs)
            } else {
                let mut best = direct_inner(cf, r, u, &zs, ns.p1());
                if ns.p1().is_infinite() {
                    best = best.max(best_refined_z(cf, r, u, &zs, depth));
                }
                best
            }
        };
        for _ in 0..depth {
            let cands = candidates(&centre, h, 4, family);
            let scored: Vec<(f64, Vec<f64>)> = cands
                .into_par_iter()
                .filter(|u| u.iter().all(|&x| x > 0.0 && x <= 0.5))
                .map(|u| (inner_at(&u), u))
                .collect();
            for (v, u) in scored {
                if v > out {
                    out = v;
                    centre = u;
                }
            }
            h /= 4.0;
        }
    }
    Ok(out)
}

fn candidates(centre: &[f64], h: f64, s: usize, family: ShapeFamily) -> Vec<Vec<f64>> {
    let d = centre.len();
    let side = 2 * s + 1;
    match family {
        ShapeFamily::Diagonal => (0..side)
            .map(|t| vec![centre[0] + (t as f64 - s as f64) * h / s as f64; d])
            .collect(),
        ShapeFamily::Product => (0..side.pow(d as u32))
            .map(|c| {
                let mut o = c;
                (0..d)
                    .map(|j| {
                        let t = (o % side) as f64 - s as f64;
                        o /= side;
                        centre[j] + t * h / s as f64
                    })
                    .collect()
            })
            .collect(),
    }
}

/// `L_2` norm over the same `z` grid as the factorized path, at an arbitrary shape.
fn grid_inner_l2(cf: &CubatureFormula, r: u32, u: &[f64], zs: &[f64]) -> f64 {
    let d = cf.d();
    let m = cf.m();
    let lam = cf.lambdas();
    let hz = 1.0 / zs.len() as f64;
    let nz = zs.len();
    let mut total = vec![1.0; m * m];
    let mut means = vec![1.0; m];
    for j in 0..d {
        let h = hat_matrix(&cf.points().column(j), u[j], r, zs);
        for a in 0..m {
            let ha = &h[a * nz..(a + 1) * nz];
            means[a] *= hz * ha.iter().sum::<f64>();
            for b in 0..m {
                let hb = &h[b * nz..(b + 1) * nz];
                total[a * m + b] *= hz * ha.iter().zip(hb).map(|(x, y)| x * y).sum::<f64>();
            }
        }
    }
    let c: f64 = u.iter().map(|v| v.powi(r as i32)).product();
    let pair = fsum((0..m * m).map(|i| lam[i / m] * lam[i % m] * total[i]));
    let cross = fsum((0..m).map(|a| lam[a] * means[a]));
    fsum([pair, -2.0 * c * cross, c * c]).max(0.0).sqrt()
}

fn direct_inner(cf: &CubatureFormula, r: u32, u: &[f64], zs: &[f64], p1: Exponent) -> f64 {
    let d = cf.d();
    let nz = zs.len();
    let count = nz.pow(d as u32);
    let mut z = vec![0.0; d];
    let vals: Vec<f64> = (0..count)
        .map(|t| {
            let mut o = t;
            for zj in z.iter_mut() {
                *zj = zs[o % nz];
                o /= nz;
            }
            error_field(cf, r, &z, u).delta
        })
        .collect();
    grid_norm(&vals, (1.0 / nz as f64).powi(d as i32), p1)
}

fn best_refined_z(cf: &CubatureFormula, r: u32, u: &[f64], zs: &[f64], depth: u32) -> f64 {
    let d = cf.d();
    let nz = zs.len();
    let count = nz.pow(d as u32);
    let mut best = (0usize, -1.0);
    let mut z = vec![0.0; d];
    for t in 0..count {
        let mut o = t;
        for zj in z.iter_mut() {
            *zj = zs[o % nz];
            o /= nz;
        }
        let v = error_field(cf, r, &z, u).delta.abs();
        if v > best.1 {
            best = (t, v);
        }
    }
    let mut o = best.0;
    let centre: Vec<f64> = (0..d)
        .map(|_| {
            let c = zs[o % nz];
            o /= nz;
            c
        })
        .collect();
    refine_z(cf, r, u, centre, 1.0 / nz as f64, depth)
}

fn refine_z(cf: &CubatureFormula, r: u32, u: &[f64], mut centre: Vec<f64>, mut h: f64, depth: u32) -> f64 {
    let mut best = error_field(cf, r, &centre, u).delta.abs();
    for _ in 0..depth {
        for z in candidates(&centre, h, 4, ShapeFamily::Product) {
            let v = error_field(cf, r, &z, u).delta.abs();
            if v > best {
                best = v;
                centre = z;
            }
        }
        h /= 4.0;
    }
    best
}

/// Number of log-spaced shapes in the fixed-volume family.
pub const FIXED_VOLUME_SHAPES: usize = 256;

/// Shapes `u = (u_1, v / u_1)` with `u_1` log-spaced in `[2v, 1/2]`.
pub fn fixed_volume_shapes(v: f64) -> Result<Vec<[f64; 2]>> {
    if !(v > 0.0 && v <= 0.25) {
        return Err(Error::EmptyShapeFamily(v));
    }
    let (lo, hi) = ((2.0 * v).ln(), 0.5f64.ln());
    let n = FIXED_VOLUME_SHAPES;
    Ok((0..n)
        .map(|i| {
            let u1 = if n == 1 { 0.5 } else { (lo + (hi - lo) * i as f64 / (n - 1) as f64).exp() };
            let u1 = u1.clamp(2.0 * v, 0.5);
            [u1, (v / u1).min(0.5)]
        })
        .collect())
}

/// Fixed-volume discrepancy in `d = 2`: sup over shapes with `u_1 u_2 = v` of `||delta(., u)||_{p1}`.
///
/// `p1 = 2` is exact in `z`; other exponents use a midpoint `z`-grid with `z_nodes` per axis.
pub fn fixed_volume_disc(cf: &CubatureFormula, r: u32, v: f64, p1: Exponent, z_nodes: usize) -> Result<f64> {
    if cf.d() != 2 {
        return Err(Error::UnsupportedDimension(cf.d()));
    }
    check_q(p1, false)?;
    let shapes = fixed_volume_shapes(v)?;
    let zs = midpoints(0.0, 1.0, z_nodes.max(2));
    let vals: Vec<f64> = shapes
        .par_iter()
        .map(|u| {
            if p1 == Exponent::Finite(2.0) {
                error_field_l2(cf, r, u)
            } else {
                direct_inner(cf, r, u, &zs, p1)
            }
        })
        .collect();
    Ok(vals.into_iter().fold(0.0, f64::max))
}

/// `sum_{k != 0, k in idx} |Lambda(xi,k)|^2 pr_bar(k)^{-s}` with tail bound `B^2 * tail(s)`.
pub fn weighted_sum_truncated(cf: &CubatureFormula, s: f64, idx: &IndexSet) -> Result<Bounded> {
    if !(s > 1.0) {
        return Err(Error::InvalidParameter(format!("exponent must exceed 1, got {s}")));
    }
    let table = exp_sums(cf, idx)?;
    let mut acc = CompensatedSum::new();
    for (k, v) in table.iter() {
        if k.iter().all(|&x| x == 0) {
            continue;
        }
        acc.add(v.norm_sqr() * (crate::kernels::pr_bar(k) as f64).powf(-s));
    }
    Ok(Bounded { value: acc.value(), tail_bound: cf.budget().powi(2) * idx.tail_sum(s) })
}

/// Untruncated [`weighted_sum_truncated`] for even integer exponents `s = 2t`, `t <= 8`.
pub fn weighted_sum_closed(cf: &CubatureFormula, t: u32) -> Result<f64> {
    closed_form_r_guard(t)?;
    let z = crate::numeric::EvenZetaKernel::new(t);
    Ok(pair_product_sum(cf, 1.0, 1.0, |x| z.eval(x)))
}

/// Sup over a midpoint `y`-grid of `|sum_mu lambda_mu chi(xi^mu in [0,y)^d) - y^d|`.
pub fn anchored_cube_sup_error(cf: &CubatureFormula, n: usize) -> f64 {
    let d = cf.d() as i32;
    // a knot lies in [0,y)^d iff its largest coordinate is below y
    let mut keys: Vec<(f64, f64)> = cf
        .points()
        .iter()
        .zip(cf.lambdas())
        .map(|(p, &l)| (p.iter().copied().fold(0.0, f64::max), l))
        .collect();
    keys.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut k = 0;
    let mut acc = CompensatedSum::new();
    let mut best: f64 = 0.0;
    for y in midpoints(0.0, 1.0, n) {
        while k < keys.len() && keys[k].0 < y {
            acc.add(keys[k].1);
            k += 1;
        }
        best = best.max((acc.value() - y.powi(d)).abs());
    }
    best
}
