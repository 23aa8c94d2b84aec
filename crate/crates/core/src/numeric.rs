//! Small numerical helpers: compensated summation, Bernoulli polynomials,
//! torus reduction and discrete L_p norms.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

/// Neumaier's variant of Kahan summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl std::iter::FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}

/// Compensated sum of a sequence, in iteration order.
pub fn fsum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<CompensatedSum>().value()
}

/// Fractional part in `[0, 1)`.
#[inline]
pub fn frac(x: f64) -> f64 {
    let f = x - x.floor();
    if f >= 1.0 {
        0.0
    } else {
        f
    }
}

/// Signed distance to the nearest integer, in `[-1/2, 1/2)`.
#[inline]
pub fn wrap_centered(x: f64) -> f64 {
    let f = frac(x + 0.5) - 0.5;
    if f >= 0.5 {
        f - 1.0
    } else {
        f
    }
}

pub fn factorial(n: u32) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

pub fn binomial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Bernoulli numbers `B_0..=B_n` (convention `B_1 = -1/2`).
pub fn bernoulli_numbers(n: usize) -> Vec<f64> {
    let mut b = vec![0.0; n + 1];
    b[0] = 1.0;
    for k in 1..=n {
        let mut s = 0.0;
        for (j, bj) in b.iter().enumerate().take(k) {
            s += binomial(k as u32 + 1, j as u32) * bj;
        }
        b[k] = -s / (k as f64 + 1.0);
    }
    b
}

/// Bernoulli polynomial `B_n(x)`.
pub fn bernoulli_poly(n: usize, x: f64) -> f64 {
    let b = bernoulli_numbers(n);
    // Horner in x over coefficients C(n,k) B_{n-k}
    let mut acc = 0.0;
    for k in (0..=n).rev() {
        acc = acc * x + binomial(n as u32, k as u32) * b[n - k];
    }
    acc
}

/// Largest `t` for which the Bernoulli closed form is used.
pub const MAX_CLOSED_FORM_ORDER: u32 = 8;

/// Closed form of `sum_{k != 0} |k|^{-2t} exp(2 pi i k x)` for integer `t >= 1`:
/// `(-1)^{t+1} (2 pi)^{2t} B_{2t}({x}) / (2t)!`.
#[derive(Debug, Clone)]
pub struct EvenZetaKernel {
    coeffs: Vec<f64>,
    scale: f64,
}

impl EvenZetaKernel {
    pub fn new(t: u32) -> Self {
        assert!((1..=MAX_CLOSED_FORM_ORDER).contains(&t), "order {t} out of range");
        let n = 2 * t as usize;
        let b = bernoulli_numbers(n);
        // coefficient of x^k in B_n(x) is C(n,k) B_{n-k}
        let coeffs = (0..=n)
            .map(|k| binomial(n as u32, k as u32) * b[n - k])
            .collect();
        let sign = if t % 2 == 1 { 1.0 } else { -1.0 };
        let scale = sign * (2.0 * PI).powi(n as i32) / factorial(n as u32);
        Self { coeffs, scale }
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        let x = frac(x);
        let mut acc = 0.0;
        for c in self.coeffs.iter().rev() {
            acc = acc * x + c;
        }
        self.scale * acc
    }
}

/// Riemann zeta upper bound for real `s > 1` (partial sum plus integral tail).
pub fn zeta_upper(s: f64) -> f64 {
    assert!(s > 1.0);
    const N: usize = 2000;
    let partial = fsum((1..=N).map(|n| (n as f64).powf(-s)));
    partial + (N as f64).powf(1.0 - s) / (s - 1.0)
}

/// Norm exponent in `[1, inf]` with an explicit infinity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Exponent {
    Finite(f64),
    #[serde(with = "inf_repr")]
    Infinity,
}

mod inf_repr {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str("inf")
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<(), D::Error> {
        let s = String::deserialize(d)?;
        if s == "inf" {
            Ok(())
        } else {
            Err(serde::de::Error::custom("expected \"inf\""))
        }
    }
}

impl Exponent {
    pub fn is_infinite(self) -> bool {
        matches!(self, Exponent::Infinity)
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            Exponent::Finite(p) => Some(p),
            Exponent::Infinity => None,
        }
    }

    /// Hölder conjugate `p' = p / (p - 1)`.
    pub fn conjugate(self) -> Exponent {
        match self {
            Exponent::Infinity => Exponent::Finite(1.0),
            Exponent::Finite(p) if p == 1.0 => Exponent::Infinity,
            Exponent::Finite(p) => Exponent::Finite(p / (p - 1.0)),
        }
    }

    /// Comparison key; infinity sorts above every finite value.
    pub fn as_f64(self) -> f64 {
        match self {
            Exponent::Finite(p) => p,
            Exponent::Infinity => f64::INFINITY,
        }
    }
}

impl std::fmt::Display for Exponent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Exponent::Finite(p) => write!(f, "{p}"),
            Exponent::Infinity => write!(f, "inf"),
        }
    }
}

impl std::str::FromStr for Exponent {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "∞" => Ok(Exponent::Infinity),
            other => other
                .parse::<f64>()
                .ok()
                .filter(|p| p.is_finite())
                .map(Exponent::Finite)
                .ok_or_else(|| format!("not a norm exponent: {s}")),
        }
    }
}

/// Discrete `L_p` norm with a uniform cell weight `w` (the cell measure).
pub fn grid_norm(values: &[f64], w: f64, p: Exponent) -> f64 {
    match p {
        Exponent::Infinity => values.iter().fold(0.0_f64, |m, v| m.max(v.abs())),
        Exponent::Finite(p) if p == 2.0 => (w * fsum(values.iter().map(|v| v * v))).sqrt(),
        Exponent::Finite(p) if p == 1.0 => w * fsum(values.iter().map(|v| v.abs())),
        Exponent::Finite(p) => (w * fsum(values.iter().map(|v| v.abs().powf(p)))).powf(1.0 / p),
    }
}

/// Midpoint nodes of `n` equal cells on `[a, b]`.
pub fn midpoints(a: f64, b: f64, n: usize) -> Vec<f64> {
    let h = (b - a) / n as f64;
    (0..n).map(|i| a + (i as f64 + 0.5) * h).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn bernoulli_numbers_known() {
        let b = bernoulli_numbers(8);
        assert_relative_eq!(b[1], -0.5);
        assert_relative_eq!(b[2], 1.0 / 6.0);
        assert_relative_eq!(b[4], -1.0 / 30.0, epsilon = 1e-15);
        assert_relative_eq!(b[6], 1.0 / 42.0, epsilon = 1e-15);
        assert_relative_eq!(b[8], -1.0 / 30.0, epsilon = 1e-15);
        assert_eq!(b[3], 0.0);
    }

    #[test]
    fn even_zeta_kernel_matches_direct_series() {
        for t in 1..=3u32 {
            let ker = EvenZetaKernel::new(t);
            for &x in &[0.0, 0.1, 0.37, 0.5, 0.93] {
                let direct = 2.0
                    * fsum((1..=200_000).rev().map(|k| {
                        let k = k as f64;
                        (2.0 * PI * k * x).cos() / k.powi(2 * t as i32)
                    }));
                let tol = if t == 1 { 1e-5 } else { 1e-12 };
                assert!((ker.eval(x) - direct).abs() < tol, "t={t} x={x}");
            }
        }
        assert_relative_eq!(EvenZetaKernel::new(1).eval(0.0), PI * PI / 3.0, epsilon = 1e-14);
    }

    #[test]
    fn compensated_sum_beats_naive() {
        let xs = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(fsum(xs), 2.0);
    }

    #[test]
    fn exponent_parsing() {
        assert_eq!("inf".parse::<Exponent>().unwrap(), Exponent::Infinity);
        assert_eq!("2".parse::<Exponent>().unwrap(), Exponent::Finite(2.0));
        assert!("abc".parse::<Exponent>().is_err());
        assert_eq!(Exponent::Finite(2.0).conjugate(), Exponent::Finite(2.0));
        assert_eq!(Exponent::Infinity.conjugate(), Exponent::Finite(1.0));
    }

    #[test]
    fn wrap_and_frac() {
        assert_eq!(frac(-0.25), 0.75);
        assert_eq!(frac(1.0), 0.0);
        assert_eq!(wrap_centered(0.75), -0.25);
        assert_eq!(wrap_centered(0.5), -0.5);
    }
}
