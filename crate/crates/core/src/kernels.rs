//! Kernels of the smoothness classes and exponential sums over hyperbolic crosses.
//!
//! Conventions:
//! * `F_{r,alpha}(x) = 1 + 2 sum_{k>=1} k^{-r} cos(2 pi k x - alpha pi / 2)`, tensorized over `d`.
//! * `h^1(t,u)` is the indicator of `[-u/2, u/2)`; `h^r = h^{r-1} * h^1`, so that
//!   `h^r(t,u) = u^{r-1} M_r(t/u)` with `M_r` the centered cardinal B-spline of order `r`.
//!   The tilde versions are the 1-periodizations.
//! * `Lambda(xi,k) = sum_mu lambda_mu exp(2 pi i <k, xi^mu>)`.

use std::collections::HashMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numeric::{binomial, factorial, wrap_centered, zeta_upper, EvenZetaKernel};
use crate::pointset::CubatureFormula;

/// A value together with a certified bound on the neglected part.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounded {
    pub value: f64,
    pub tail_bound: f64,
}

/// `prod_j max(|k_j|, 1)`.
pub fn pr_bar(k: &[i64]) -> u64 {
    k.iter().map(|&kj| kj.unsigned_abs().max(1)).product()
}

/// A frequency vector in `Z^d`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FreqIndex(pub Vec<i64>);

impl FreqIndex {
    pub fn pr_bar(&self) -> u64 {
        pr_bar(&self.0)
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&k| k == 0)
    }
}

/// Hyperbolic cross `{k in Z^d : pr_bar(k) <= K}`, enumerated in lexicographic order.
#[derive(Debug, Clone)]
pub struct IndexSet {
    d: usize,
    level: u64,
    members: Vec<i64>,
    tail_memo: std::sync::Arc<std::sync::Mutex<HashMap<u64, f64>>>,
}

impl IndexSet {
    /// Upper limit on the number of stored frequencies.
    pub const MAX_MEMBERS: usize = 50_000_000;

    pub fn new(d: usize, level: u64) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidParameter("dimension must be at least 1".into()));
        }
        if level == 0 {
            return Err(Error::InvalidParameter("hyperbolic cross level must be positive".into()));
        }
        let mut members = Vec::new();
        let mut cur = vec![0i64; d];
        enumerate_cross(&mut cur, 0, 1, level, &mut members)?;
        Ok(Self { d, level, members, tail_memo: Default::default() })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn level(&self) -> u64 {
        self.level
    }

    pub fn len(&self) -> usize {
        self.members.len() / self.d
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[i64]> + '_ {
        self.members.chunks_exact(self.d)
    }

    pub fn get(&self, i: usize) -> &[i64] {
        &self.members[i * self.d..(i + 1) * self.d]
    }

    pub fn contains(&self, k: &[i64]) -> bool {
        k.len() == self.d && pr_bar(k) <= self.level
    }

    /// Position of `k` in the enumeration.
    pub fn position(&self, k: &[i64]) -> Option<usize> {
        if !self.contains(k) {
            return None;
        }
        let (mut lo, mut hi) = (0, self.len());
        while lo < hi {
            let mid = (lo + hi) / 2;
            match self.get(mid).cmp(k) {
                std::cmp::Ordering::Less => lo = mid + 1,
                std::cmp::Ordering::Greater => hi = mid,
                std::cmp::Ordering::Equal => return Some(mid),
            }
        }
        None
    }

    /// Certified upper bound on `sum_{pr_bar(k) > K} pr_bar(k)^{-s}` for `s > 1`.
    pub fn tail_sum(&self, s: f64) -> f64 {
        if s <= 1.0 {
            return f64::INFINITY;
        }
        let key = s.to_bits();
        if let Some(v) = self.tail_memo.lock().ok().and_then(|m| m.get(&key).copied()) {
            return v;
        }
        let v = cross_tail(self.d, self.level, s);
        if let Ok(mut m) = self.tail_memo.lock() {
            m.insert(key, v);
        }
        v
    }

    /// Certified upper bound on `sum_{pr_bar(k) > K} pr_bar(k)^{-2r}`.
    pub fn tail_bound(&self, r: u32) -> f64 {
        self.tail_sum(2.0 * r as f64)
    }
}

fn enumerate_cross(cur: &mut [i64], j: usize, prod: u64, level: u64, out: &mut Vec<i64>) -> Result<()> {
    if j == cur.len() {
        if out.len() / cur.len() >= IndexSet::MAX_MEMBERS {
            return Err(Error::TooLarge(format!(
                "hyperbolic cross exceeds {} members",
                IndexSet::MAX_MEMBERS
            )));
        }
        out.extend_from_slice(cur);
        return Ok(());
    }
    let max_abs = (level / prod) as i64;
    for k in -max_abs..=max_abs {
        cur[j] = k;
        let p = prod * k.unsigned_abs().max(1);
        enumerate_cross(cur, j + 1, p, level, out)?;
    }
    cur[j] = 0;
    Ok(())
}

/// Number of integers with `max(|k|,1) = n`: 3 for n = 1, 2 otherwise.
fn multiplicity(n: u64) -> f64 {
    if n == 1 {
        3.0
    } else {
        2.0
    }
}

/// Upper bound on `sum_{n > x} c(n) n^{-s}` for integer `x >= 0`.
fn tail_1d(x: u64, s: f64) -> f64 {
    if x == 0 {
        return 1.0 + 2.0 * zeta_upper(s);
    }
    let n = (x + 1) as f64;
    2.0 * (n.powf(-s) + n.powf(1.0 - s) / (s - 1.0))
}

fn cross_tail(d: usize, level: u64, s: f64) -> f64 {
    let full = 1.0 + 2.0 * zeta_upper(s);
    let mut memo: HashMap<(usize, u64), f64> = HashMap::new();
    cross_tail_rec(d, level, s, full, &mut memo)
}

fn cross_tail_rec(d: usize, x: u64, s: f64, full: f64, memo: &mut HashMap<(usize, u64), f64>) -> f64 {
    if x == 0 {
        return full.powi(d as i32);
    }
    if d == 1 {
        return tail_1d(x, s);
    }
    if let Some(&v) = memo.get(&(d, x)) {
        return v;
    }
    // first coordinate n <= x: the rest must exceed floor(x / n)
    let mut acc = crate::numeric::CompensatedSum::new();
    for n in 1..=x {
        let w = multiplicity(n) * (n as f64).powf(-s);
        acc.add(w * cross_tail_rec(d - 1, x / n, s, full, memo));
    }
    acc.add(tail_1d(x, s) * full.powi(d as i32 - 1));
    let v = acc.value();
    memo.insert((d, x), v);
    v
}

/// Smoothness order `r` with phase shifts `alpha` (one per dimension).
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothOrder {
    pub r: u32,
    pub alpha: Vec<f64>,
}

impl SmoothOrder {
    pub fn new(r: u32, alpha: Vec<f64>) -> Result<Self> {
        if r == 0 {
            return Err(Error::InvalidParameter("smoothness r must be at least 1".into()));
        }
        Ok(Self { r, alpha })
    }

    pub fn plain(r: u32, d: usize) -> Result<Self> {
        Self::new(r, vec![0.0; d])
    }

    pub fn d(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_plain(&self) -> bool {
        self.alpha.iter().all(|&a| a == 0.0)
    }
}

/// Shift `z` and shape `u` of a periodic hat function.
#[derive(Debug, Clone, PartialEq)]
pub struct HatParams {
    pub z: Vec<f64>,
    pub u: Vec<f64>,
}

impl HatParams {
    pub fn new(z: Vec<f64>, u: Vec<f64>) -> Result<Self> {
        if z.len() != u.len() {
            return Err(Error::DimensionMismatch { expected: z.len(), found: u.len() });
        }
        if let Some(&bad) = u.iter().find(|&&uj| !(uj > 0.0 && uj <= 0.5)) {
            return Err(Error::InvalidParameter(format!("hat shape {bad} outside (0, 1/2]")));
        }
        Ok(Self { z, u })
    }
}

/// Exponential sums of a cubature formula over an index set.
#[derive(Debug, Clone)]
pub struct ExpSumTable {
    idx: IndexSet,
    values: Vec<Complex64>,
    lambda_zero: f64,
    budget: f64,
    m: usize,
}

impl ExpSumTable {
    pub fn index_set(&self) -> &IndexSet {
        &self.idx
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn get(&self, k: &[i64]) -> Option<Complex64> {
        self.idx.position(k).map(|i| self.values[i])
    }

    pub fn lambda_zero(&self) -> f64 {
        self.lambda_zero
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// `(k, Lambda(xi,k))` pairs in enumeration order.
    pub fn iter(&self) -> impl Iterator<Item = (&[i64], Complex64)> + '_ {
        self.idx.iter().zip(self.values.iter().copied())
    }
}

/// `Lambda(xi,k)` for every `k` in `idx`.
pub fn exp_sums(cf: &CubatureFormula, idx: &IndexSet) -> Result<ExpSumTable> {
    if idx.d() != cf.d() {
        return Err(Error::DimensionMismatch { expected: cf.d(), found: idx.d() });
    }
    let d = cf.d();
    let coords = cf.points().coords();
    let lambdas = cf.lambdas();
    let ks: Vec<&[i64]> = idx.iter().collect();
    let values: Vec<Complex64> = ks
        .par_iter()
        .map(|k| exp_sum_at(coords, lambdas, d, k))
        .collect();
    Ok(ExpSumTable {
        idx: idx.clone(),
        values,
        lambda_zero: cf.lambda_zero(),
        budget: cf.budget(),
        m: cf.m(),
    })
}

/// `Lambda(xi,k)` for a single frequency.
pub fn exp_sum(cf: &CubatureFormula, k: &[i64]) -> Complex64 {
    exp_sum_at(cf.points().coords(), cf.lambdas(), cf.d(), k)
}

fn exp_sum_at(coords: &[f64], lambdas: &[f64], d: usize, k: &[i64]) -> Complex64 {
    let mut re = 0.0;
    let mut im = 0.0;
    for (p, &l) in coords.chunks_exact(d).zip(lambdas) {
        let mut t = 0.0;
        for (&kj, &xj) in k.iter().zip(p) {
            let prod = kj as f64 * xj;
            t += prod - prod.round();
        }
        let (s, c) = (2.0 * PI * (t - t.round())).sin_cos();
        re += l * c;
        im += l * s;
    }
    Complex64::new(re, im)
}

/// Fourier coefficient `hat F_{r,alpha}(k)`.
pub fn fourier_f(so: &SmoothOrder, k: &[i64]) -> Complex64 {
    let r = so.r as i32;
    let mut acc = Complex64::new(1.0, 0.0);
    for (j, &kj) in k.iter().enumerate() {
        if kj == 0 {
            continue;
        }
        let a = so.alpha.get(j).copied().unwrap_or(0.0);
        let mag = (kj.unsigned_abs() as f64).powi(-r);
        let phase = -(kj.signum() as f64) * a * PI / 2.0;
        acc *= Complex64::from_polar(mag, phase);
    }
    acc
}

/// Fourier coefficient of the periodic hat `tilde h^r(., 0, u)` at integer `k`.
pub fn hat_fourier(k: i64, u: f64, r: u32) -> f64 {
    if k == 0 {
        u.powi(r as i32)
    } else {
        let kf = k as f64;
        ((PI * kf * u).sin() / (PI * kf)).powi(r as i32)
    }
}

/// Centered cardinal B-spline of order `r` (support `[-r/2, r/2)`, unit mass).
pub fn centered_bspline(x: f64, r: u32) -> f64 {
    let half = r as f64 / 2.0;
    if x < -half || x >= half {
        return 0.0;
    }
    if r <= 4 {
        // truncated-power representation; (y)_+^0 is the step H(y) with H(0) = 1
        let mut acc = 0.0;
        for i in 0..=r {
            let y = x + half - i as f64;
            if y < 0.0 {
                continue;
            }
            let c = binomial(r, i) * if i % 2 == 0 { 1.0 } else { -1.0 };
            acc += c * y.powi(r as i32 - 1);
        }
        (acc / factorial(r - 1)).max(0.0)
    } else {
        // Cox-de Boor recurrence for centered splines
        let a = centered_bspline(x + 0.5, r - 1);
        let b = centered_bspline(x - 0.5, r - 1);
        ((half + x) * a + (half - x) * b) / (r - 1) as f64
    }
}

/// Non-periodic univariate hat `h^r(t, u) = u^{r-1} M_r(t/u)`.
pub fn hat_1d(t: f64, u: f64, r: u32) -> f64 {
    u.powi(r as i32 - 1) * centered_bspline(t / u, r)
}

/// 1-periodization of [`hat_1d`].
pub fn hat_1d_periodic(t: f64, u: f64, r: u32) -> f64 {
    let t0 = wrap_centered(t);
    let reach = (r as f64 * u / 2.0).ceil() as i64 + 1;
    let mut acc = 0.0;
    for n in -reach..=reach {
        acc += hat_1d(t0 + n as f64, u, r);
    }
    acc
}

/// `tilde h^r(x, z, u) = prod_j tilde h^r(x_j - z_j, u_j)`.
pub fn hat_eval(x: &[f64], hp: &HatParams, r: u32) -> f64 {
    x.iter()
        .zip(hp.z.iter().zip(&hp.u))
        .map(|(&xj, (&zj, &uj))| hat_1d_periodic(xj - zj, uj, r))
        .product()
}

/// `int_{[0,1)^d} tilde h^r(x, z, u) dx = prod_j u_j^r`.
pub fn hat_integral(hp: &HatParams, r: u32) -> f64 {
    hp.u.iter().map(|u| u.powi(r as i32)).product()
}

/// `a_r` in `int_0^{1/2} hat_fourier(k,u,r)^2 du = a_r |k|^{-2r}` for `k != 0`.
pub fn hat_sq_u_coeff(r: u32) -> f64 {
    binomial(2 * r, r) / (2.0 * 4f64.powi(r as i32) * PI.powi(2 * r as i32))
}

/// `int_0^{1/2} u^{2r} du`.
pub fn hat_sq_u_zero(r: u32) -> f64 {
    0.5f64.powi(2 * r as i32 + 1) / (2 * r + 1) as f64
}

/// `I(k) = int_0^{1/2} hat_fourier(k,u,r)^2 du`.
///
/// For integer `k != 0` the interval `(0, 1/2]` covers `|k|` half-periods of
/// `sin^{2r}(pi k u)`, whose mean is `C(2r,r) / 4^r`, so the integral is exact.
pub fn hat_sq_u_integral(k: i64, r: u32) -> f64 {
    if k == 0 {
        hat_sq_u_zero(r)
    } else {
        hat_sq_u_coeff(r) * (k.unsigned_abs() as f64).powi(-2 * r as i32)
    }
}

/// Positive constant `c(r)` with `I(k) >= c(r) max(|k|,1)^{-2r}`.
pub fn hat_sq_u_lower_const(r: u32) -> f64 {
    hat_sq_u_coeff(r).min(hat_sq_u_zero(r))
}

/// `B_r(x, y) = prod_j (y_j - x_j)_+^{r-1} / (r-1)!`; for `r = 1` the indicator of `x < y`.
pub fn b_r_eval(x: &[f64], y: &[f64], r: u32) -> f64 {
    let f = factorial(r - 1);
    x.iter()
        .zip(y)
        .map(|(&xj, &yj)| {
            if yj > xj {
                (yj - xj).powi(r as i32 - 1) / f
            } else {
                0.0
            }
        })
        .product()
}

/// Truncated Fourier synthesis of `F_{r,alpha}(x)` over `idx`.
///
/// The tail bound is `sum_{pr_bar(k) > K} pr_bar(k)^{-r}`, infinite for `r = 1`.
pub fn f_eval(x: &[f64], so: &SmoothOrder, idx: &IndexSet) -> Result<Bounded> {
    if x.len() != idx.d() || so.d() != idx.d() {
        return Err(Error::DimensionMismatch { expected: idx.d(), found: x.len() });
    }
    if idx.level() < 2 {
        return Err(Error::TruncationTooCoarse { tail: f64::INFINITY, sum: f64::NAN });
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for k in idx.iter() {
        let mut t = 0.0;
        for (&kj, &xj) in k.iter().zip(x) {
            let p = kj as f64 * xj;
            t += p - p.round();
        }
        acc += fourier_f(so, k) * Complex64::from_polar(1.0, 2.0 * PI * t);
    }
    debug_assert!(acc.im.abs() <= 1e-8 * (1.0 + acc.re.abs()), "imaginary residue {}", acc.im);
    Ok(Bounded { value: acc.re, tail_bound: idx.tail_sum(so.r as f64) })
}

/// [`f_eval`] with a requested tolerance on the certified truncation error.
pub fn f_eval_tol(x: &[f64], so: &SmoothOrder, idx: &IndexSet, tol: f64) -> Result<Bounded> {
    let b = f_eval(x, so, idx)?;
    if !(b.tail_bound <= tol) {
        return Err(Error::TruncationTooCoarse { tail: b.tail_bound, sum: b.value });
    }
    Ok(b)
}

/// Univariate `F_{r,alpha}` in closed form (Bernoulli polynomials), for even `r`
/// and `alpha` a multiple of 2 (where the phase is a sign).
pub fn f_closed_1d(x: f64, r: u32, alpha: f64) -> Option<f64> {
    if r % 2 != 0 || r / 2 > crate::numeric::MAX_CLOSED_FORM_ORDER {
        return None;
    }
    let sign = if alpha.rem_euclid(4.0) == 0.0 {
        1.0
    } else if alpha.rem_euclid(4.0) == 2.0 {
        -1.0
    } else {
        return None;
    };
    Some(1.0 + sign * EvenZetaKernel::new(r / 2).eval(x))
}

/// Univariate `F_{r,alpha}` by direct cosine synthesis up to frequency `kmax`.
pub fn f_series_1d(x: f64, r: u32, alpha: f64, kmax: u64) -> f64 {
    let mut acc = crate::numeric::CompensatedSum::new();
    for k in (1..=kmax).rev() {
        let kf = k as f64;
        let p = kf * x;
        acc.add(kf.powi(-(r as i32)) * (2.0 * PI * (p - p.round()) - alpha * PI / 2.0).cos());
    }
    1.0 + 2.0 * acc.value()
}

/// Per-dimension pair kernel for the closed-form `(2,2)` smooth periodic discrepancy:
/// `kappa(x) = sum_k I(k) e^{2 pi i k x} = I(0) + a_r sum_{k!=0} |k|^{-2r} e^{2 pi i k x}`.
#[derive(Debug, Clone)]
pub struct BoxPairKernel {
    zero: f64,
    coeff: f64,
    zeta: EvenZetaKernel,
}

impl BoxPairKernel {
    pub fn new(r: u32) -> Result<Self> {
        if r == 0 || r > crate::numeric::MAX_CLOSED_FORM_ORDER {
            return Err(Error::InvalidParameter(format!(
                "closed form supports 1 <= r <= {}",
                crate::numeric::MAX_CLOSED_FORM_ORDER
            )));
        }
        Ok(Self { zero: hat_sq_u_zero(r), coeff: hat_sq_u_coeff(r), zeta: EvenZetaKernel::new(r) })
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        self.zero + self.coeff * self.zeta.eval(x)
    }

    pub fn zero_term(&self) -> f64 {
        self.zero
    }
}
