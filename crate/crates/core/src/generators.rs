//! Point-set and cubature-formula generators.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::frac;
use crate::pointset::{CubatureFormula, PointSet, Weights};

/// Which construction to run, with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeneratorSpec {
    Random { m: usize, d: usize, seed: u64 },
    Grid { n: usize, d: usize },
    Fibonacci { n: u32 },
    Korobov { m: u64, a: u64, d: usize },
    Frolov { n_target: usize, d: usize, clip: bool },
    AnchoredAxis { m: usize, d: usize },
}

impl GeneratorSpec {
    pub fn dimension(&self) -> usize {
        match *self {
            GeneratorSpec::Random { d, .. }
            | GeneratorSpec::Grid { d, .. }
            | GeneratorSpec::Korobov { d, .. }
            | GeneratorSpec::Frolov { d, .. }
            | GeneratorSpec::AnchoredAxis { d, .. } => d,
            GeneratorSpec::Fibonacci { .. } => 2,
        }
    }

    pub fn generate(&self) -> Result<CubatureFormula> {
        match *self {
            GeneratorSpec::Random { m, d, seed } => Ok(CubatureFormula::qmc(gen_random(m, d, seed)?)),
            GeneratorSpec::Grid { n, d } => Ok(CubatureFormula::qmc(gen_grid(n, d)?)),
            GeneratorSpec::Fibonacci { n } => Ok(CubatureFormula::qmc(gen_fibonacci(n)?)),
            GeneratorSpec::Korobov { m, a, d } => Ok(CubatureFormula::qmc(gen_korobov(m, a, d)?)),
            GeneratorSpec::Frolov { n_target, d, clip } => Ok(gen_frolov_with(n_target, d, clip)?.formula),
            GeneratorSpec::AnchoredAxis { m, d } => gen_anchored_axis(m, d),
        }
    }
}

/// I.i.d. uniform points from a seeded ChaCha8 stream.
pub fn gen_random(m: usize, d: usize, seed: u64) -> Result<PointSet> {
    if m == 0 || d == 0 {
        return Err(Error::InvalidParameter("random set needs m >= 1 and d >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coords = (0..m * d).map(|_| rng.gen::<f64>()).collect();
    PointSet::from_flat(d, coords)
}

/// Tensor midpoint grid with `n` nodes per axis (`m = n^d`).
pub fn gen_grid(n: usize, d: usize) -> Result<PointSet> {
    if n == 0 || d == 0 {
        return Err(Error::InvalidParameter("grid needs n >= 1 and d >= 1".into()));
    }
    let m = n
        .checked_pow(d as u32)
        .ok_or_else(|| Error::TooLarge(format!("{n}^{d} grid points")))?;
    let mut coords = Vec::with_capacity(m * d);
    for i in 0..m {
        let mut rest = i;
        for _ in 0..d {
            coords.push(((rest % n) as f64 + 0.5) / n as f64);
            rest /= n;
        }
    }
    PointSet::from_flat(d, coords)
}

/// `F_n` with `F_1 = F_2 = 1`.
pub fn fibonacci(n: u32) -> u64 {
    let (mut a, mut b) = (0u64, 1u64);
    for _ in 0..n {
        let c = a + b;
        a = b;
        b = c;
    }
    a
}

/// Index `n` with `F_n = m`, if `m` is a Fibonacci number (`n >= 3`).
pub fn fibonacci_index(m: u64) -> Option<u32> {
    (3..90).find(|&n| fibonacci(n) == m)
}

/// Fibonacci lattice `{(mu/F_n, {mu F_{n-1}/F_n})}`.
pub fn gen_fibonacci(n: u32) -> Result<PointSet> {
    if !(3..=80).contains(&n) {
        return Err(Error::InvalidParameter(format!("fibonacci index {n} outside [3, 80]")));
    }
    let m = fibonacci(n);
    let g = fibonacci(n - 1);
    let mut coords = Vec::with_capacity(2 * m as usize);
    for mu in 0..m {
        coords.push(mu as f64 / m as f64);
        coords.push(((mu as u128 * g as u128) % m as u128) as f64 / m as f64);
    }
    PointSet::from_flat(2, coords)
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Korobov lattice `{({mu a^{j-1} / m})_j}`.
pub fn gen_korobov(m: u64, a: u64, d: usize) -> Result<PointSet> {
    if m < 2 || a == 0 || a >= m || d == 0 {
        return Err(Error::InvalidParameter(format!("korobov needs m >= 2, 1 <= a < m, d >= 1 (m={m}, a={a})")));
    }
    if gcd(a, m) != 1 {
        return Err(Error::BadGenerator { m, a });
    }
    let mut gen = Vec::with_capacity(d);
    let mut p = 1u128;
    for _ in 0..d {
        gen.push(p as u64);
        p = (p * a as u128) % m as u128;
    }
    let mut coords = Vec::with_capacity(m as usize * d);
    for mu in 0..m {
        for &g in &gen {
            coords.push(((mu as u128 * g as u128) % m as u128) as f64 / m as f64);
        }
    }
    PointSet::from_flat(d, coords)
}

/// Output of the Frolov construction.
#[derive(Debug, Clone)]
pub struct FrolovSet {
    pub formula: CubatureFormula,
    /// The scaling `s` in `s * n_target^{-1/d} * V z`.
    pub scale: f64,
    pub roots: Vec<f64>,
}

/// Roots of `p_d(t) = prod_{j=1}^d (t - 2j + 1) - 1`, ascending.
pub fn frolov_roots(d: usize) -> Result<Vec<f64>> {
    if !(2..=4).contains(&d) {
        return Err(Error::UnsupportedDimension(d));
    }
    let p = |t: f64| (1..=d).map(|j| t - (2 * j - 1) as f64).product::<f64>() - 1.0;
    let (lo, hi) = (-1.0, 2.0 * d as f64 + 1.0);
    let steps = 20_000;
    let h = (hi - lo) / steps as f64;
    let mut roots = Vec::with_capacity(d);
    for i in 0..steps {
        let (mut a, mut b) = (lo + i as f64 * h, lo + (i + 1) as f64 * h);
        let (fa, fb) = (p(a), p(b));
        if fa == 0.0 {
            roots.push(a);
            continue;
        }
        if fa * fb >= 0.0 {
            continue;
        }
        let mut fa = fa;
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            let fm = p(mid);
            if fm == 0.0 || b - a < 1e-15 {
                a = mid;
                b = mid;
                break;
            }
            if fa * fm < 0.0 {
                b = mid;
            } else {
                a = mid;
                fa = fm;
            }
        }
        roots.push(0.5 * (a + b));
    }
    if roots.len() != d {
        return Err(Error::InvalidParameter(format!("found {} roots for degree {d}", roots.len())));
    }
    Ok(roots)
}

/// Vandermonde matrix `V[i][j] = theta_j^i` (row-major).
pub fn vandermonde(roots: &[f64]) -> Vec<Vec<f64>> {
    let d = roots.len();
    (0..d).map(|i| roots.iter().map(|t| t.powi(i as i32)).collect()).collect()
}

fn invert(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for c in 0..n {
        let piv = (c..n).max_by(|&x, &y| m[x][c].abs().total_cmp(&m[y][c].abs()))?;
        if m[piv][c].abs() < 1e-300 {
            return None;
        }
        m.swap(c, piv);
        let pv = m[c][c];
        for v in m[c].iter_mut() {
            *v /= pv;
        }
        for r in 0..n {
            if r != c {
                let f = m[r][c];
                if f != 0.0 {
                    for k in 0..2 * n {
                        m[r][k] -= f * m[c][k];
                    }
                }
            }
        }
    }
    Some(m.into_iter().map(|r| r[n..].to_vec()).collect())
}

fn determinant(a: &[Vec<f64>]) -> f64 {
    let n = a.len();
    let mut m = a.to_vec();
    let mut det = 1.0;
    for c in 0..n {
        let piv = (c..n).max_by(|&x, &y| m[x][c].abs().total_cmp(&m[y][c].abs())).unwrap();
        if piv != c {
            m.swap(c, piv);
            det = -det;
        }
        let pv = m[c][c];
        det *= pv;
        if pv == 0.0 {
            return 0.0;
        }
        for r in c + 1..n {
            let f = m[r][c] / pv;
            for k in c..n {
                m[r][k] -= f * m[c][k];
            }
        }
    }
    det
}

const FROLOV_MAX_CANDIDATES: u128 = 200_000_000;

/// Lattice points of `c V Z^d` inside the centered cube `[-1/2, 1/2)^d`.
fn frolov_hits(v: &[Vec<f64>], vinv: &[Vec<f64>], c: f64, collect: bool) -> Result<(usize, Vec<f64>)> {
    let d = v.len();
    let bounds: Vec<i64> = vinv
        .iter()
        .map(|row| (row.iter().map(|x| x.abs()).sum::<f64>() * 0.5 / c).ceil() as i64 + 1)
        .collect();
    let total: u128 = bounds.iter().map(|&b| (2 * b + 1) as u128).product();
    if total > FROLOV_MAX_CANDIDATES {
        return Err(Error::TooLarge(format!("frolov enumeration of {total} lattice candidates")));
    }
    let mut z: Vec<i64> = bounds.iter().map(|&b| -b).collect();
    let mut count = 0;
    let mut pts = Vec::new();
    let mut x = vec![0.0; d];
    'outer: loop {
        let mut inside = true;
        for i in 0..d {
            let xi = c * v[i].iter().zip(&z).map(|(a, &b)| a * b as f64).sum::<f64>();
            if !(-0.5..0.5).contains(&xi) {
                inside = false;
                break;
            }
            x[i] = xi;
        }
        if inside {
            count += 1;
            if collect {
                pts.extend_from_slice(&x);
            }
        }
        for i in 0..d {
            z[i] += 1;
            if z[i] <= bounds[i] {
                continue 'outer;
            }
            z[i] = -bounds[i];
        }
        break;
    }
    Ok((count, pts))
}

/// Frolov lattice formula with about `n_target` knots (`m` in `[n_target, 2 n_target)`).
pub fn gen_frolov(n_target: usize, d: usize) -> Result<CubatureFormula> {
    Ok(gen_frolov_with(n_target, d, false)?.formula)
}

/// As [`gen_frolov`]; `clip` drops knots whose shifted coordinates round out of
/// `[0,1)` instead of reducing them modulo 1.
pub fn gen_frolov_with(n_target: usize, d: usize, clip: bool) -> Result<FrolovSet> {
    if !(2..=4).contains(&d) {
        return Err(Error::UnsupportedDimension(d));
    }
    if n_target < 16 {
        return Err(Error::InvalidParameter(format!("frolov needs n_target >= 16, got {n_target}")));
    }
    let roots = frolov_roots(d)?;
    let v = vandermonde(&roots);
    let vinv = invert(&v).ok_or_else(|| Error::InvalidParameter("singular Vandermonde matrix".into()))?;
    let det = determinant(&v).abs();
    let n = n_target as f64;
    let base = n.powf(-1.0 / d as f64);
    // hits ~ 1 / (c^d det): aim at 1.4 n_target
    let s0 = (1.4 * det).powf(-1.0 / d as f64);
    let in_range = |h: usize| h >= n_target && h < 2 * n_target;
    let mut lo = s0 * 0.5; // many hits
    let mut hi = s0 * 2.0; // few hits
    let mut s = s0;
    let mut found = None;
    for _ in 0..100 {
        let (h, _) = frolov_hits(&v, &vinv, s * base, false)?;
        if in_range(h) {
            found = Some(s);
            break;
        }
        if h >= 2 * n_target {
            lo = s;
        } else {
            hi = s;
        }
        s = (lo * hi).sqrt();
    }
    let s = found.ok_or_else(|| Error::InvalidParameter("frolov scaling bisection failed".into()))?;
    let (_, raw) = frolov_hits(&v, &vinv, s * base, true)?;
    let mut coords = Vec::with_capacity(raw.len());
    for p in raw.chunks_exact(d) {
        let mapped: Vec<f64> = p.iter().map(|x| x + 0.5).collect();
        if clip {
            if mapped.iter().all(|x| (0.0..1.0).contains(x)) {
                coords.extend(mapped);
            }
        } else {
            coords.extend(mapped.into_iter().map(frac));
        }
    }
    let pts = PointSet::from_flat(d, coords)?;
    Ok(FrolovSet { formula: CubatureFormula::qmc(pts), scale: s, roots })
}

/// Knots `((k/(m+1))^{1/d}, 0, ..., 0)`, `k = 1..m`, all weights `1/(m+1)`.
pub fn gen_anchored_axis(m: usize, d: usize) -> Result<CubatureFormula> {
    if m == 0 || d == 0 {
        return Err(Error::InvalidParameter("anchored-axis needs m >= 1 and d >= 1".into()));
    }
    let mut coords = Vec::with_capacity(m * d);
    for k in 1..=m {
        let w = k as f64 / (m + 1) as f64;
        coords.push(w.powf(1.0 / d as f64));
        coords.extend(std::iter::repeat(0.0).take(d - 1));
    }
    let pts = PointSet::from_flat(d, coords)?;
    let wts = Weights::new(vec![1.0 / (m + 1) as f64; m])?;
    CubatureFormula::new(pts, wts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn rows(p: &PointSet) -> Vec<Vec<f64>> {
        p.iter().map(|r| r.to_vec()).collect()
    }

    #[test]
    fn random_is_reproducible_and_seed_sensitive() {
        assert_eq!(gen_random(3, 2, 7).unwrap(), gen_random(3, 2, 7).unwrap());
        assert_ne!(gen_random(2, 2, 7).unwrap(), gen_random(2, 2, 8).unwrap());
        let p = gen_random(1000, 1, 1).unwrap();
        let mean = p.coords().iter().sum::<f64>() / 1000.0;
        assert!((0.45..=0.55).contains(&mean));
    }

    #[test]
    fn fibonacci_example() {
        let p = gen_fibonacci(5).unwrap();
        let expect = [[0.0, 0.0], [0.2, 0.6], [0.4, 0.2], [0.6, 0.8], [0.8, 0.4]];
        for (got, want) in p.iter().zip(expect) {
            assert_relative_eq!(got[0], want[0], epsilon = 1e-15);
            assert_relative_eq!(got[1], want[1], epsilon = 1e-15);
        }
        assert_eq!(fibonacci(18), 2584);
        assert_eq!(fibonacci_index(55), Some(10));
        assert_eq!(fibonacci_index(56), None);
    }

    #[test]
    fn fibonacci_points_distinct_and_first_axis_uniform() {
        let p = gen_fibonacci(12).unwrap();
        let m = p.m();
        for (i, r) in p.iter().enumerate() {
            assert_eq!(r[0], i as f64 / m as f64);
        }
        let mut second: Vec<u64> = p.iter().map(|r| (r[1] * m as f64).round() as u64).collect();
        second.sort();
        second.dedup();
        assert_eq!(second.len(), m);
    }

    #[test]
    fn korobov_example_and_errors() {
        let p = gen_korobov(5, 2, 2).unwrap();
        let expect = [[0.0, 0.0], [0.2, 0.4], [0.4, 0.8], [0.6, 0.2], [0.8, 0.6]];
        for (got, want) in p.iter().zip(expect) {
            assert_relative_eq!(got[0], want[0], epsilon = 1e-15);
            assert_relative_eq!(got[1], want[1], epsilon = 1e-15);
        }
        let p = gen_korobov(7, 3, 1).unwrap();
        assert_eq!(rows(&p), (0..7).map(|i| vec![i as f64 / 7.0]).collect::<Vec<_>>());
        assert!(matches!(gen_korobov(4, 2, 2), Err(Error::BadGenerator { m: 4, a: 2 })));
    }

    fn closed_under_shift(p: &PointSet, g: &[f64]) -> bool {
        p.iter().all(|x| {
            let y: Vec<f64> = x.iter().zip(g).map(|(a, b)| frac(a + b)).collect();
            p.iter().any(|q| {
                q.iter().zip(&y).all(|(a, b)| {
                    let diff = (a - b).abs();
                    diff < 1e-12 || (1.0 - diff) < 1e-12
                })
            })
        })
    }

    #[test]
    fn lattices_are_rank_one_groups() {
        let p = gen_fibonacci(9).unwrap();
        let m = fibonacci(9) as f64;
        assert!(closed_under_shift(&p, &[1.0 / m, fibonacci(8) as f64 / m]));
        let p = gen_korobov(31, 12, 3).unwrap();
        assert!(closed_under_shift(&p, &[1.0 / 31.0, 12.0 / 31.0, (144 % 31) as f64 / 31.0]));
    }

    #[test]
    fn frolov_roots_and_contract() {
        let r = frolov_roots(2).unwrap();
        assert_relative_eq!(r[0], 2.0 - 2f64.sqrt(), epsilon = 1e-13);
        assert_relative_eq!(r[1], 2.0 + 2f64.sqrt(), epsilon = 1e-13);
        assert!(determinant(&vandermonde(&r)).abs() > 1e-6);
        for d in 2..=4 {
            for n in [16usize, 64, 300] {
                let f = gen_frolov_with(n, d, false).unwrap();
                assert!(f.formula.m() >= n && f.formula.m() < 2 * n, "d={d} n={n} m={}", f.formula.m());
                let again = gen_frolov(n, d).unwrap();
                assert_eq!(again, f.formula);
            }
        }
        let f = gen_frolov(64, 2).unwrap();
        assert!((32..=128).contains(&f.m()));
        assert!(matches!(gen_frolov(64, 5), Err(Error::UnsupportedDimension(5))));
        assert!(gen_frolov(8, 2).is_err());
    }

    #[test]
    fn anchored_axis_example() {
        let cf = gen_anchored_axis(3, 2).unwrap();
        let firsts: Vec<f64> = cf.points().iter().map(|p| p[0]).collect();
        assert_relative_eq!(firsts[0], 0.5, epsilon = 1e-15);
        assert_relative_eq!(firsts[1], 0.5f64.sqrt(), epsilon = 1e-15);
        assert_relative_eq!(firsts[2], 0.75f64.sqrt(), epsilon = 1e-15);
        assert!(cf.points().iter().all(|p| p[1] == 0.0));
        assert_relative_eq!(cf.budget(), 0.75, epsilon = 1e-15);
        let cf = gen_anchored_axis(4, 1).unwrap();
        let firsts: Vec<f64> = cf.points().iter().map(|p| p[0]).collect();
        assert_eq!(firsts, vec![0.2, 0.4, 0.6, 0.8]);
    }

    #[test]
    fn grid_shape() {
        let p = gen_grid(4, 2).unwrap();
        assert_eq!(p.m(), 16);
        assert_eq!(p.point(0), &[0.125, 0.125]);
    }
}
