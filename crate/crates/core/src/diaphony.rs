//! Diaphony and the dual error function
//! `g(x) = sum_k Lambda(xi,k) hat F(k) e^{2 pi i k x} - hat F(0)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::discrepancy::pair_product_sum;
use crate::error::{Error, Result};
use crate::kernels::{exp_sums, pr_bar, Bounded, IndexSet, SmoothOrder};
use crate::numeric::{grid_norm, midpoints, CompensatedSum, EvenZetaKernel, Exponent, MAX_CLOSED_FORM_ORDER};
use crate::pointset::CubatureFormula;

/// Full series in closed form, or a hyperbolic-cross truncation with a certified tail.
#[derive(Debug, Clone, Copy)]
pub enum Summation<'a> {
    ClosedForm,
    Truncated(&'a IndexSet),
}

/// `(r,2)`-diaphony `sqrt(sum_{k!=0} |Lambda|^2 pr_bar(k)^{-2r} + |Lambda(xi,0) - 1|^2)`.
pub fn diaphony_r2(cf: &CubatureFormula, r: u32, sum: Summation<'_>) -> Result<Bounded> {
    if r == 0 {
        return Err(Error::InvalidParameter("r must be at least 1".into()));
    }
    let zero = (cf.lambda_zero() - 1.0).powi(2);
    match sum {
        Summation::ClosedForm => {
            if r > MAX_CLOSED_FORM_ORDER {
                return Err(Error::InvalidParameter(format!(
                    "closed form supports r <= {MAX_CLOSED_FORM_ORDER}; pass an index set"
                )));
            }
            let z = EvenZetaKernel::new(r);
            let s = pair_product_sum(cf, 1.0, 1.0, |x| z.eval(x)) + zero;
            Ok(Bounded { value: s.max(0.0).sqrt(), tail_bound: 0.0 })
        }
        Summation::Truncated(idx) => {
            let table = exp_sums(cf, idx)?;
            let mut acc = CompensatedSum::new();
            for (k, v) in table.iter() {
                if k.iter().all(|&x| x == 0) {
                    continue;
                }
                acc.add(v.norm_sqr() * (pr_bar(k) as f64).powi(-2 * r as i32));
            }
            acc.add(zero);
            let partial = acc.value();
            let tail = cf.budget().powi(2) * idx.tail_bound(r);
            if !(tail <= 0.1 * partial) {
                return Err(Error::TruncationTooCoarse { tail, sum: partial });
            }
            let v = partial.sqrt();
            Ok(Bounded { value: v, tail_bound: (partial + tail).sqrt() - v })
        }
    }
}

/// Parameters of `g` (or `g^c` when `c != 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct GSpec {
    pub so: SmoothOrder,
    /// Weight `c^{-r}` replaces `1` at `k_j = 0`.
    pub c: f64,
    pub q: Exponent,
}

impl GSpec {
    pub fn new(so: SmoothOrder, c: f64, q: Exponent) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidParameter(format!("c must be positive, got {c}")));
        }
        if let Exponent::Finite(v) = q {
            if v <= 1.0 {
                return Err(Error::UnsupportedQ(v));
            }
        }
        Ok(Self { so, c, q })
    }

    fn zero_weight(&self) -> f64 {
        self.c.powi(-(self.so.r as i32))
    }

    /// `hat F^c(k)`.
    pub fn coefficient(&self, k: &[i64]) -> Complex64 {
        let r = self.so.r as i32;
        let mut acc = Complex64::new(1.0, 0.0);
        for (j, &kj) in k.iter().enumerate() {
            if kj == 0 {
                acc *= self.zero_weight();
            } else {
                let a = self.so.alpha.get(j).copied().unwrap_or(0.0);
                acc *= Complex64::from_polar((kj.unsigned_abs() as f64).powi(-r), -(kj.signum() as f64) * a * PI / 2.0);
            }
        }
        acc
    }

    /// Univariate closed form of `F^c` when one exists.
    fn closed_1d(&self) -> Option<Box<dyn Fn(f64) -> f64 + Send + Sync>> {
        let r = self.so.r;
        let signs: Option<Vec<f64>> = self
            .so
            .alpha
            .iter()
            .map(|a| match a.rem_euclid(4.0) {
                x if x == 0.0 => Some(1.0),
                x if x == 2.0 => Some(-1.0),
                _ => None,
            })
            .collect();
        let signs = signs?;
        if signs.iter().any(|&s| s != signs[0]) {
            return None;
        }
        let (s, c0) = (signs.first().copied().unwrap_or(1.0), self.zero_weight());
        if r % 2 == 0 && r / 2 <= MAX_CLOSED_FORM_ORDER {
            let z = EvenZetaKernel::new(r / 2);
            Some(Box::new(move |t| c0 + s * z.eval(t)))
        } else if r == 1 {
            // sum_{k != 0} |k|^{-1} e^{2 pi i k t} = -2 ln(2 |sin(pi t)|)
            Some(Box::new(move |t| c0 - s * 2.0 * (2.0 * (PI * t).sin().abs()).ln()))
        } else {
            None
        }
    }

    /// Whether [`Summation::ClosedForm`] is available.
    pub fn has_closed_form(&self) -> bool {
        self.closed_1d().is_some()
    }
}

/// `b * t` with `0 * inf = 0` (no knots, no tail).
fn times_budget(b: f64, t: f64) -> f64 {
    if b == 0.0 {
        0.0
    } else {
        b * t
    }
}

/// Bound on `sup |g - g_K|` (infinite when `r = 1`).
fn sup_tail(cf: &CubatureFormula, gs: &GSpec, idx: &IndexSet) -> f64 {
    let d = idx.d() as i32;
    times_budget(cf.budget(), gs.zero_weight().max(1.0).powi(d) * idx.tail_sum(gs.so.r as f64))
}

/// Bound on `||g - g_K||_q` from Hausdorff-Young (`q >= 2`) or the `L_2` tail (`q <= 2`).
fn norm_tail(cf: &CubatureFormula, gs: &GSpec, idx: &IndexSet, q: Exponent) -> f64 {
    let d = idx.d() as i32;
    let w = gs.zero_weight().max(1.0).powi(d);
    let r = gs.so.r as f64;
    let b = cf.budget();
    match q {
        Exponent::Infinity => sup_tail(cf, gs, idx),
        Exponent::Finite(v) if v <= 2.0 => times_budget(b, w * idx.tail_sum(2.0 * r).sqrt()),
        Exponent::Finite(v) => {
            let qc = v / (v - 1.0);
            times_budget(b, w * idx.tail_sum(r * qc).powf(1.0 / qc))
        }
    }
}

fn check_dims(cf: &CubatureFormula, gs: &GSpec) -> Result<()> {
    if gs.so.d() != cf.d() {
        return Err(Error::DimensionMismatch { expected: cf.d(), found: gs.so.d() });
    }
    Ok(())
}

/// `g(x)` (or `g^c(x)`).
pub fn g_eval(cf: &CubatureFormula, gs: &GSpec, x: &[f64], sum: Summation<'_>) -> Result<Bounded> {
    check_dims(cf, gs)?;
    if x.len() != cf.d() {
        return Err(Error::DimensionMismatch { expected: cf.d(), found: x.len() });
    }
    let f0 = gs.zero_weight().powi(cf.d() as i32);
    match sum {
        Summation::ClosedForm => {
            let f = gs.closed_1d().ok_or_else(|| {
                Error::InvalidParameter("no closed form for this smoothness; pass an index set".into())
            })?;
            Ok(Bounded { value: g_closed_at(cf, &*f, x) - f0, tail_bound: 0.0 })
        }
        Summation::Truncated(idx) => {
            if idx.d() != cf.d() {
                return Err(Error::DimensionMismatch { expected: cf.d(), found: idx.d() });
            }
            let table = exp_sums(cf, idx)?;
            let mut acc = Complex64::new(0.0, 0.0);
            for (k, v) in table.iter() {
                let mut t = 0.0;
                for (&kj, &xj) in k.iter().zip(x) {
                    let p = kj as f64 * xj;
                    t += p - p.round();
                }
                acc += v * gs.coefficient(k) * Complex64::from_polar(1.0, 2.0 * PI * t);
            }
            let tail = sup_tail(cf, gs, idx);
            let value = acc.re - f0;
            if !(tail <= 0.1 * value.abs().max(f0)) {
                return Err(Error::TruncationTooCoarse { tail, sum: value });
            }
            Ok(Bounded { value, tail_bound: tail })
        }
    }
}

fn g_closed_at(cf: &CubatureFormula, f: &(dyn Fn(f64) -> f64 + Send + Sync), x: &[f64]) -> f64 {
    let mut acc = CompensatedSum::new();
    for (p, &l) in cf.points().iter().zip(cf.lambdas()) {
        acc.add(l * p.iter().zip(x).map(|(&a, &b)| f(a + b)).product::<f64>());
    }
    acc.value()
}

/// Values of `g` on the midpoint grid with `n` nodes per axis (first axis slowest).
pub fn g_grid(cf: &CubatureFormula, gs: &GSpec, sum: Summation<'_>, n: usize) -> Result<Vec<f64>> {
    check_dims(cf, gs)?;
    let d = cf.d();
    let total = n
        .checked_pow(d as u32)
        .filter(|&t| t <= 1 << 26)
        .ok_or_else(|| Error::TooLarge(format!("{n}^{d} grid nodes")))?;
    let xs = midpoints(0.0, 1.0, n);
    let f0 = gs.zero_weight().powi(d as i32);
    let node = |c: usize, x: &mut [f64]| {
        let mut o = c;
        for j in (0..d).rev() {
            x[j] = xs[o % n];
            o /= n;
        }
    };
    match sum {
        Summation::ClosedForm => {
            let f = gs.closed_1d().ok_or_else(|| {
                Error::InvalidParameter("no closed form for this smoothness; pass an index set".into())
            })?;
            Ok((0..total)
                .into_par_iter()
                .map_init(
                    || vec![0.0; d],
                    |x, c| {
                        node(c, x);
                        g_closed_at(cf, &*f, x) - f0
                    },
                )
                .collect())
        }
        Summation::Truncated(idx) => {
            if idx.d() != d {
                return Err(Error::DimensionMismatch { expected: d, found: idx.d() });
            }
            let table = exp_sums(cf, idx)?;
            let level = idx.level() as i64;
            // per-axis characters e^{2 pi i k x_i}, k in [-K, K]
            let chars: Vec<Complex64> = (-level..=level)
                .flat_map(|k| {
                    xs.iter().map(move |&x| {
                        let p = k as f64 * x;
                        Complex64::from_polar(1.0, 2.0 * PI * (p - p.round()))
                    })
                })
                .collect();
            let coefs: Vec<(Vec<usize>, Complex64)> = table
                .iter()
                .map(|(k, v)| {
                    (k.iter().map(|&kj| ((kj + level) as usize) * n).collect(), v * gs.coefficient(k))
                })
                .collect();
            Ok((0..total)
                .into_par_iter()
                .map_init(
                    || vec![0usize; d],
                    |ix, c| {
                        let mut o = c;
                        for j in (0..d).rev() {
                            ix[j] = o % n;
                            o /= n;
                        }
                        let mut re = CompensatedSum::new();
                        for (offs, coef) in &coefs {
                            let mut e = *coef;
                            for j in 0..d {
                                e *= chars[offs[j] + ix[j]];
                            }
                            re.add(e.re);
                        }
                        re.value() - f0
                    },
                )
                .collect())
        }
    }
}

/// `||g||_q` on the midpoint grid with `n` nodes per axis, with a bound on the truncation error.
pub fn g_norm_q(cf: &CubatureFormula, gs: &GSpec, sum: Summation<'_>, n: usize) -> Result<Bounded> {
    let vals = g_grid(cf, gs, sum, n)?;
    let value = grid_norm(&vals, (n as f64).powi(-(cf.d() as i32)), gs.q);
    let tail_bound = match sum {
        Summation::ClosedForm => 0.0,
        Summation::Truncated(idx) => norm_tail(cf, gs, idx, gs.q),
    };
    if tail_bound.is_infinite() {
        log::warn!("no finite truncation bound for q={} at r={}", gs.q, gs.so.r);
    }
    Ok(Bounded { value, tail_bound })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{gen_fibonacci, gen_korobov, gen_random};
    use crate::pointset::{PointSet, Weights};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn single(x: &[f64], w: f64) -> CubatureFormula {
        let pts = PointSet::new(x.len(), &[x.to_vec()]).unwrap();
        CubatureFormula::new(pts, Weights::new(vec![w]).unwrap()).unwrap()
    }

    fn random_cf(rng: &mut ChaCha8Rng, m: usize, d: usize, budget: f64) -> CubatureFormula {
        let pts = gen_random(m, d, rng.gen()).unwrap();
        let raw: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b: f64 = raw.iter().map(|x: &f64| x.abs()).sum();
        CubatureFormula::new(pts, Weights::new(raw.iter().map(|x| x * budget / b).collect()).unwrap()).unwrap()
    }

    fn gs(r: u32, d: usize, c: f64, q: Exponent) -> GSpec {
        GSpec::new(SmoothOrder::plain(r, d).unwrap(), c, q).unwrap()
    }

    #[test]
    fn diaphony_examples() {
        let target = PI / 3f64.sqrt();
        let cf = single(&[0.0], 1.0);
        assert_relative_eq!(diaphony_r2(&cf, 1, Summation::ClosedForm).unwrap().value, target, epsilon = 1e-13);
        let idx = IndexSet::new(1, 1_000_000).unwrap();
        let t = diaphony_r2(&cf, 1, Summation::Truncated(&idx)).unwrap();
        assert!((t.value - target).abs() <= 1e-6);
        assert!(t.value <= target && target <= t.value + t.tail_bound);
        let rows = vec![vec![0.3, 0.7]; 5];
        let many = CubatureFormula::qmc(PointSet::new(2, &rows).unwrap());
        let one = single(&[0.3, 0.7], 1.0);
        for r in 1..=2 {
            assert_relative_eq!(
                diaphony_r2(&many, r, Summation::ClosedForm).unwrap().value,
                diaphony_r2(&one, r, Summation::ClosedForm).unwrap().value,
                max_relative = 1e-12
            );
        }
        let zero = single(&[0.2, 0.9], 0.0);
        assert_eq!(diaphony_r2(&zero, 2, Summation::ClosedForm).unwrap().value, 1.0);
        let coarse = IndexSet::new(1, 2).unwrap();
        assert!(matches!(
            diaphony_r2(&cf, 1, Summation::Truncated(&coarse)),
            Err(Error::TruncationTooCoarse { .. })
        ));
    }

    #[test]
    fn diaphony_closed_matches_truncated() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for d in 1..=3 {
            for r in 1..=2 {
                let cf = random_cf(&mut rng, 6, d, 1.5);
                let level = match d {
                    1 => 200_000,
                    2 => 4000,
                    _ => 300,
                };
                let idx = IndexSet::new(d, level).unwrap();
                let e = diaphony_r2(&cf, r, Summation::ClosedForm).unwrap().value;
                let t = diaphony_r2(&cf, r, Summation::Truncated(&idx)).unwrap();
                assert!(t.value <= e + 1e-12 && e <= t.value + t.tail_bound + 1e-12, "d={d} r={r}");
            }
        }
    }

    #[test]
    fn diaphony_invariances() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10 {
            let cf = random_cf(&mut rng, 7, 3, 1.2);
            let s: Vec<f64> = (0..3).map(|_| rng.gen()).collect();
            let perm: Vec<Vec<f64>> = cf.points().iter().map(|p| vec![p[2], p[0], p[1]]).collect();
            let permuted = CubatureFormula::new(PointSet::new(3, &perm).unwrap(), cf.weights().clone()).unwrap();
            for r in 1..=2 {
                let a = diaphony_r2(&cf, r, Summation::ClosedForm).unwrap().value;
                let b = diaphony_r2(&cf.shifted(&s).unwrap(), r, Summation::ClosedForm).unwrap().value;
                let c = diaphony_r2(&permuted, r, Summation::ClosedForm).unwrap().value;
                assert_relative_eq!(a, b, max_relative = 1e-10);
                assert_relative_eq!(a, c, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn g_examples() {
        let cf = single(&[0.0], 1.0);
        let idx = IndexSet::new(1, 100_000).unwrap();
        let g = g_eval(&cf, &gs(2, 1, 1.0, Exponent::Finite(2.0)), &[0.0], Summation::Truncated(&idx)).unwrap();
        let target = PI * PI / 3.0;
        assert!((g.value - target).abs() <= g.tail_bound);
        let c = g_eval(&cf, &gs(2, 1, 1.0, Exponent::Finite(2.0)), &[0.0], Summation::ClosedForm).unwrap();
        assert_relative_eq!(c.value, target, epsilon = 1e-13);
        let zero = single(&[0.4], 0.0);
        let idx = IndexSet::new(1, 64).unwrap();
        let v = g_eval(&zero, &gs(1, 1, 2.0, Exponent::Finite(2.0)), &[0.3], Summation::Truncated(&idx)).unwrap();
        assert_relative_eq!(v.value, -0.5, epsilon = 1e-15);
        // QMC: the constant term drops out, g has mean zero
        let cf = CubatureFormula::qmc(gen_fibonacci(7).unwrap());
        let idx = IndexSet::new(2, 30).unwrap();
        let vals = g_grid(&cf, &gs(2, 2, 1.0, Exponent::Finite(2.0)), Summation::Truncated(&idx), 64).unwrap();
        assert!(vals.iter().sum::<f64>().abs() / vals.len() as f64 <= 1e-12);
    }

    #[test]
    fn g_closed_matches_truncated_pointwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let cf = random_cf(&mut rng, 4, 2, 1.0);
        let idx = IndexSet::new(2, 2000).unwrap();
        for c in [1.0, 2.5] {
            let spec = gs(2, 2, c, Exponent::Finite(2.0));
            for _ in 0..5 {
                let x = [rng.gen(), rng.gen()];
                let a = g_eval(&cf, &spec, &x, Summation::ClosedForm).unwrap().value;
                let b = g_eval(&cf, &spec, &x, Summation::Truncated(&idx)).unwrap();
                assert!((a - b.value).abs() <= b.tail_bound);
            }
        }
        // r = 1 log-sine closed form against a long truncation
        let cf1 = random_cf(&mut rng, 3, 1, 1.0);
        let spec = gs(1, 1, 1.0, Exponent::Finite(2.0));
        let idx = IndexSet::new(1, 200_000).unwrap();
        let table = exp_sums(&cf1, &idx).unwrap();
        for x in [0.1, 0.55] {
            let a = g_eval(&cf1, &spec, &[x], Summation::ClosedForm).unwrap().value;
            let mut acc = Complex64::new(0.0, 0.0);
            for (k, v) in table.iter() {
                acc += v * spec.coefficient(k) * Complex64::from_polar(1.0, 2.0 * PI * k[0] as f64 * x);
            }
            assert!((a - (acc.re - 1.0)).abs() < 1e-3);
        }
    }

    #[test]
    fn parseval_against_diaphony() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for d in 1..=2 {
            for r in 1..=2 {
                for _ in 0..3 {
                    let m = rng.gen_range(1..=8);
                    let cf = random_cf(&mut rng, m, d, 1.5);
                    let spec = gs(r, d, 1.0, Exponent::Finite(2.0));
                    let (g, dia) = if r == 1 && d == 2 {
                        // log singularities along lines defeat the midpoint rule; compare at matched truncation
                        let idx = IndexSet::new(2, 120).unwrap();
                        (
                            g_norm_q(&cf, &spec, Summation::Truncated(&idx), 256).unwrap().value,
                            diaphony_r2(&cf, r, Summation::Truncated(&idx)).unwrap().value,
                        )
                    } else {
                        let n = if d == 1 { 8192 } else { 1024 };
                        (
                            g_norm_q(&cf, &spec, Summation::ClosedForm, n).unwrap().value,
                            diaphony_r2(&cf, r, Summation::ClosedForm).unwrap().value,
                        )
                    };
                    assert!((g - dia).abs() <= 1e-3 * dia, "d={d} r={r} g={g} dia={dia}");
                }
            }
        }
    }

    #[test]
    fn truncated_grid_is_alias_free() {
        // a grid with more than 2K nodes per axis integrates |g_K|^2 exactly
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for (d, level, n) in [(1usize, 2000u64, 4096usize), (2, 40, 96)] {
            for r in 1..=2 {
                let cf = random_cf(&mut rng, 5, d, 1.3);
                let idx = IndexSet::new(d, level).unwrap();
                let spec = gs(r, d, 1.0, Exponent::Finite(2.0));
                let g = g_norm_q(&cf, &spec, Summation::Truncated(&idx), n).unwrap();
                let table = exp_sums(&cf, &idx).unwrap();
                let coef_sq: f64 = table
                    .iter()
                    .map(|(k, v)| {
                        let c = if k.iter().all(|&x| x == 0) { v - 1.0 } else { v * spec.coefficient(k) };
                        c.norm_sqr()
                    })
                    .sum();
                assert_relative_eq!(g.value, coef_sq.sqrt(), max_relative = 1e-10);
                let dia = diaphony_r2(&cf, r, Summation::ClosedForm).unwrap().value;
                assert!(g.value <= dia + 1e-12 && dia <= g.value + g.tail_bound);
            }
        }
    }

    #[test]
    fn norms_monotone_and_shift_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let cf = random_cf(&mut rng, 5, 2, 1.0);
        let n = 128;
        let v = |q: Exponent, cf: &CubatureFormula| {
            g_norm_q(cf, &gs(2, 2, 1.0, q), Summation::ClosedForm, n).unwrap().value
        };
        assert!(v(Exponent::Finite(2.0), &cf) <= v(Exponent::Finite(4.0), &cf));
        assert!(v(Exponent::Finite(4.0), &cf) <= v(Exponent::Infinity, &cf));
        // shifting by whole grid cells permutes the grid values
        let s = [3.0 / n as f64, 17.0 / n as f64];
        let sh = cf.shifted(&s).unwrap();
        for q in [Exponent::Finite(1.5), Exponent::Finite(2.0), Exponent::Infinity] {
            assert!((v(q, &cf) - v(q, &sh)).abs() <= 1e-6);
        }
    }

    #[test]
    fn duality_consistency() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cf = random_cf(&mut rng, 6, 1, 1.0);
        let n = 1024;
        for &(q, qc) in &[(2.0, 2.0), (3.0, 1.5), (1.5, 3.0)] {
            let spec = gs(2, 1, 1.0, Exponent::Finite(q));
            let vals = g_grid(&cf, &spec, Summation::ClosedForm, n).unwrap();
            let norm = grid_norm(&vals, 1.0 / n as f64, Exponent::Finite(q));
            for _ in 0..20 {
                let phi: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let pn = grid_norm(&phi, 1.0 / n as f64, Exponent::Finite(qc));
                let pairing: f64 = vals.iter().zip(&phi).map(|(a, b)| a * b / pn).sum::<f64>() / n as f64;
                assert!(pairing.abs() <= norm * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn truncated_norm_tails() {
        let cf = CubatureFormula::qmc(gen_korobov(13, 5, 2).unwrap());
        let idx = IndexSet::new(2, 100).unwrap();
        let g = g_norm_q(&cf, &gs(1, 2, 1.0, Exponent::Finite(4.0)), Summation::Truncated(&idx), 64).unwrap();
        assert!(g.tail_bound.is_finite());
        let g = g_norm_q(&cf, &gs(1, 2, 1.0, Exponent::Infinity), Summation::Truncated(&idx), 64).unwrap();
        assert!(g.tail_bound.is_infinite());
    }

    #[test]
    fn gc_floor_probe() {
        for (cf, r) in [
            (CubatureFormula::qmc(gen_fibonacci(10).unwrap()), 2u32),
            (CubatureFormula::qmc(gen_korobov(101, 40, 2).unwrap()), 2),
            (CubatureFormula::qmc(gen_random(64, 2, 3).unwrap()), 2),
        ] {
            let m = cf.m() as f64;
            let v = g_norm_q(&cf, &gs(r, 2, 2.0, Exponent::Finite(2.0)), Summation::ClosedForm, 256)
                .unwrap()
                .value;
            assert!(v * m.powi(r as i32) * m.ln().powf(-0.5) >= 1e-6);
        }
    }
}
