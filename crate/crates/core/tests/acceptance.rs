//! Acceptance criteria, one test each. Every test prints a single
//! `criterion N: PASS|FAIL` line (visible with `--nocapture`) before asserting.

use std::f64::consts::PI;
use std::process::Command;
use std::time::Instant;

use qmc_discrepancy::diaphony::{diaphony_r2, g_norm_q, GSpec, Summation};
use qmc_discrepancy::discrepancy::{
    anchored_cube_sup_error, l2_disc_closed, smooth_periodic_disc, star_disc_exact, GridSpec, SmoothDiscMethod,
};
use qmc_discrepancy::generators::{fibonacci, gen_anchored_axis, gen_random};
use qmc_discrepancy::greedy::{ia_run, KernelDict, KernelKind, PoolSpec, ScheduleParams};
use qmc_discrepancy::harness::{fit_slope, run_study, Measure, MethodSpec, Normalization, StudyConfig, StudyGenerator};
use qmc_discrepancy::kernels::{IndexSet, SmoothOrder};
use qmc_discrepancy::{CubatureFormula, Exponent, NormSpec, PointSet, Weights};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

fn verdict(n: u32, pass: bool, detail: String) {
    println!("criterion {n}: {}  {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {n} failed: {detail}");
}

fn random_formula(rng: &mut ChaCha8Rng, m: usize, d: usize, budget: f64) -> CubatureFormula {
    let pts = gen_random(m, d, rng.gen()).unwrap();
    let raw: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let s: f64 = raw.iter().map(|v: &f64| v.abs()).sum();
    let w = Weights::new(raw.iter().map(|v| v * budget / s).collect()).unwrap();
    CubatureFormula::new(pts, w).unwrap()
}

fn single(x: &[f64]) -> CubatureFormula {
    CubatureFormula::qmc(PointSet::new(x.len(), &[x.to_vec()]).unwrap())
}

#[test]
fn criterion_1_parseval_oracle() {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst: f64 = 0.0;
    for trial in 0..20 {
        let d = 1 + trial % 2;
        let r = 1 + (trial / 2 % 2) as u32;
        let m = rng.gen_range(1..=8);
        let budget = rng.gen_range(0.2..=2.0);
        let cf = random_formula(&mut rng, m, d, budget);
        let ns = NormSpec::l2();
        let exact = smooth_periodic_disc(&cf, r, &ns, SmoothDiscMethod::FourierClosedForm).unwrap().value;
        let grid = GridSpec::default_for(d, Exponent::Finite(2.0));
        let quad = smooth_periodic_disc(&cf, r, &ns, SmoothDiscMethod::GridQuadrature(grid)).unwrap().value;
        worst = worst.max((exact - quad).abs() / exact);
    }
    let secs = t0.elapsed().as_secs_f64();
    verdict(1, worst <= 1e-3 && secs < 60.0, format!("max relative gap {worst:.2e}, {secs:.1} s"));
}

#[test]
fn criterion_2_exact_values() {
    let target = PI / 3f64.sqrt();
    let knot = single(&[0.0]);
    let closed = diaphony_r2(&knot, 1, Summation::ClosedForm).unwrap().value;
    let idx = IndexSet::new(1, 1_000_000).unwrap();
    let trunc = diaphony_r2(&knot, 1, Summation::Truncated(&idx)).unwrap();
    let l2_0 = l2_disc_closed(&knot);
    let l2_half = l2_disc_closed(&single(&[0.5]));
    let smooth = smooth_periodic_disc(&knot, 1, &NormSpec::l2(), SmoothDiscMethod::FourierClosedForm).unwrap().value;
    let checks = [
        (closed - target).abs() <= 1e-6,
        (trunc.value - target).abs() <= 1e-6 && trunc.tail_bound <= 1e-6,
        (l2_0 - (1.0f64 / 3.0).sqrt()).abs() <= 1e-12,
        (l2_half - (1.0f64 / 12.0).sqrt()).abs() <= 1e-12,
        (smooth - (1.0f64 / 12.0).sqrt()).abs() <= 1e-6,
    ];
    verdict(
        2,
        checks.iter().all(|&c| c),
        format!(
            "diaphony {closed:.12} / truncated {:.9}+{:.1e}, l2 {l2_0:.15} {l2_half:.15}, smooth {smooth:.12}",
            trunc.value, trunc.tail_bound
        ),
    );
}

#[test]
fn criterion_3_shift_invariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut worst: f64 = 0.0;
    for trial in 0..50 {
        let d = 1 + trial % 3;
        let r = 1 + (trial % 4) as u32;
        let m = rng.gen_range(1..=12);
        let budget = rng.gen_range(0.5..=2.0);
        let cf = random_formula(&mut rng, m, d, budget);
        let s: Vec<f64> = (0..d).map(|_| rng.gen()).collect();
        let sh = cf.shifted(&s).unwrap();
        let a = diaphony_r2(&cf, r, Summation::ClosedForm).unwrap().value;
        let b = diaphony_r2(&sh, r, Summation::ClosedForm).unwrap().value;
        let ns = NormSpec::l2();
        let c = smooth_periodic_disc(&cf, r, &ns, SmoothDiscMethod::FourierClosedForm).unwrap().value;
        let e = smooth_periodic_disc(&sh, r, &ns, SmoothDiscMethod::FourierClosedForm).unwrap().value;
        worst = worst.max((a - b).abs() / a).max((c - e).abs() / c);
    }
    let w0 = l2_disc_closed(&single(&[0.0]));
    let w1 = l2_disc_closed(&single(&[0.5]));
    let witness = (w0 - w1).abs() > 0.1;
    verdict(
        3,
        worst <= 1e-10 && witness,
        format!("max relative change {worst:.2e}; anchored witness {w0:.6} vs {w1:.6}"),
    );
}

/// Largest `|count / m - vol|` over corners `b` on the grid `{i / n}^2`, open boxes.
fn star_grid_oracle(pts: &PointSet, n: usize) -> f64 {
    let m = pts.m() as f64;
    let mut best: f64 = 0.0;
    let mut hist = vec![0usize; n + 2];
    for i in 0..=n {
        let b1 = i as f64 / n as f64;
        hist.iter_mut().for_each(|h| *h = 0);
        for p in pts.iter().filter(|p| p[0] < b1) {
            // first j with p[1] < j / n
            let mut j = (p[1] * n as f64).floor() as usize;
            while (j as f64 / n as f64) <= p[1] {
                j += 1;
            }
            hist[j] += 1;
        }
        let mut count = 0;
        for (j, h) in hist.iter().enumerate().take(n + 1) {
            count += h;
            let vol = b1 * j as f64 / n as f64;
            best = best.max((count as f64 / m - vol).abs());
        }
    }
    best
}

#[test]
fn criterion_4_star_exactness() {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut ok = true;
    let mut max_gap: f64 = 0.0;
    for _ in 0..20 {
        let m = rng.gen_range(1..=64);
        let pts = gen_random(m, 2, rng.gen()).unwrap();
        let exact = star_disc_exact(&pts, false).unwrap();
        let grid = star_grid_oracle(&pts, 2000);
        ok &= exact >= grid - 1e-15;
        max_gap = max_gap.max(exact - grid);
    }
    verdict(4, ok && max_gap <= 2e-3, format!("exact >= grid: {ok}, max gap {max_gap:.2e}"));
}

#[test]
fn criterion_5_rate_sharpness() {
    let m_list: Vec<usize> = (8..=18).map(|n| fibonacci(n) as usize).collect();
    let mut pass = true;
    let mut detail = Vec::new();
    for (r, lo, hi, level) in [(1u32, -1.15, -0.90, 60_000u64), (2, -2.25, -1.85, 2_000)] {
        let cfg = StudyConfig {
            generator: StudyGenerator::Fibonacci,
            measure: Measure::Smooth {
                r,
                p1: Exponent::Finite(2.0),
                p2: Exponent::Finite(2.0),
                method: MethodSpec::Closed,
            },
            m_list: m_list.clone(),
            normalization: None,
            report: None,
            csv: None,
        };
        let rep = run_study(&cfg).unwrap();
        let slope = rep.fitted_slope;
        pass &= (lo..=hi).contains(&slope);
        // spot check the untruncated values against a certified hyperbolic-cross truncation
        let probe = Measure::Smooth {
            r,
            p1: Exponent::Finite(2.0),
            p2: Exponent::Finite(2.0),
            method: MethodSpec::Truncated { level },
        };
        let cf = StudyGenerator::Fibonacci.spec_for(21).unwrap().generate().unwrap();
        let t = probe.evaluate(&cf).unwrap();
        let closed = rep.entries[0].value;
        let tail_ok = t.tail_bound < 0.01 * t.value && closed >= t.value - 1e-15 && closed <= t.value + t.tail_bound;
        pass &= tail_ok;
        detail.push(format!(
            "r={r} slope {slope:.3} in [{lo}, {hi}], truncation K={level} tail/value {:.1e}",
            t.tail_bound / t.value
        ));
    }
    verdict(5, pass, detail.join("; "));
}

#[test]
fn criterion_6_floor_probes() {
    let pow2: Vec<usize> = (4..=12).map(|k| 1usize << k).collect();
    let fib: Vec<usize> = (8..=18).map(|n| fibonacci(n) as usize).collect();
    let frolov: Vec<usize> = (4..=11).map(|k| 1usize << k).collect();
    let corpus = [
        (StudyGenerator::Random { d: 2, seed: 6 }, pow2.clone()),
        (StudyGenerator::Fibonacci, fib),
        (StudyGenerator::Korobov { d: 2, a: None }, pow2),
        (StudyGenerator::Frolov { d: 2, clip: false }, frolov),
    ];
    let l2 = |r| Measure::Smooth { r, p1: Exponent::Finite(2.0), p2: Exponent::Finite(2.0), method: MethodSpec::Closed };
    let probes = [
        (l2(1), Normalization { r: 1.0, log_power: 0.5 }),
        (l2(2), Normalization { r: 2.0, log_power: 0.5 }),
        (Measure::Diaphony { r: 2, level: None }, Normalization { r: 2.0, log_power: 0.5 }),
        (Measure::WeightedSum { t: 1, level: None }, Normalization { r: 2.0, log_power: 1.0 }),
        (Measure::WeightedSum { t: 2, level: None }, Normalization { r: 4.0, log_power: 1.0 }),
    ];
    let mut pass = true;
    let mut worst_floor = f64::INFINITY;
    let mut worst_trend = f64::INFINITY;
    for (gen, m_list) in &corpus {
        for (measure, norm) in &probes {
            let cfg = StudyConfig {
                generator: gen.clone(),
                measure: measure.clone(),
                m_list: m_list.clone(),
                normalization: Some(*norm),
                report: None,
                csv: None,
            };
            let rep = run_study(&cfg).unwrap();
            let floor = rep.floor_statistic.unwrap();
            let m_max = rep.entries.last().unwrap().m;
            let top: Vec<(f64, f64)> = rep
                .entries
                .iter()
                .filter(|e| e.m * 10 >= m_max)
                .map(|e| (e.m as f64, norm.apply(e.m, e.value)))
                .collect();
            // fitted change of the normalized statistic across one decade
            let trend = if top.len() >= 4 {
                10f64.powf(fit_slope(&top).unwrap().slope)
            } else {
                top.last().unwrap().1 / top[0].1
            };
            let ok = floor >= 1e-6 && trend >= 0.5;
            if !ok {
                println!("  {:?} {:?}: floor {floor:.3e}, decade trend {trend:.3}", gen, measure.name());
            }
            pass &= ok;
            worst_floor = worst_floor.min(floor);
            worst_trend = worst_trend.min(trend);
        }
    }
    verdict(6, pass, format!("min floor {worst_floor:.3e}, min decade trend factor {worst_trend:.3}"));
}

#[test]
fn criterion_7_greedy_rate() {
    let so = SmoothOrder::plain(2, 1).unwrap();
    let dict = KernelDict::build(&KernelKind::Translation(so.clone()), 1, &PoolSpec::Grid { size: 512 }, 2048, 2.0)
        .unwrap();
    let out = ia_run(&dict, &ScheduleParams::new(1.0, 2.0).unwrap(), 256).unwrap();
    let steps = &out.trace.steps;
    let window: Vec<_> = steps.iter().filter(|s| (16..=256).contains(&s.n)).collect();
    let slope = fit_slope(&window.iter().map(|s| (s.n as f64, s.residual_norm)).collect::<Vec<_>>()).unwrap().slope;
    let trend: Vec<f64> = window.iter().map(|s| s.residual_norm * (s.n as f64).sqrt()).collect();
    let ratio = trend.iter().cloned().fold(0.0, f64::max) / trend.iter().cloned().fold(f64::INFINITY, f64::min);

    let gs = GSpec::new(so, 1.0, Exponent::Finite(2.0)).unwrap();
    let mut worst_identity: f64 = 0.0;
    for n in [16, 64, 256] {
        let rows: Vec<Vec<f64>> = steps[..n].iter().map(|s| s.chosen_x.clone()).collect();
        let cf = CubatureFormula::qmc(PointSet::new(1, &rows).unwrap());
        let g = g_norm_q(&cf, &gs, Summation::ClosedForm, 2048).unwrap().value;
        let f = steps[n - 1].residual_norm * dict.scale();
        worst_identity = worst_identity.max((g - f).abs() / g);
    }
    let pass = slope <= -0.4 && ratio <= 10.0 && worst_identity <= 1e-6;
    verdict(
        7,
        pass,
        format!("slope {slope:.3} (<= -0.4), trend ratio {ratio:.1} (<= 10), identity gap {worst_identity:.1e}"),
    );
}

#[test]
fn criterion_8_anchored_axis() {
    let mut pass = true;
    let mut worst = f64::NEG_INFINITY;
    for d in [2, 3] {
        for m in [9, 19, 49, 99] {
            let cf = gen_anchored_axis(m, d).unwrap();
            let e = anchored_cube_sup_error(&cf, 2000);
            let bound = 1.0 / (m as f64 + 1.0) + 1e-3;
            pass &= e <= bound;
            worst = worst.max(e - bound);
        }
    }
    verdict(8, pass, format!("max (error - bound) {worst:.3e}"));
}

fn strip_runtime(v: &mut Value) {
    match v {
        Value::Object(map) => {
            map.remove("runtime_ms");
            map.values_mut().for_each(strip_runtime);
        }
        Value::Array(a) => a.iter_mut().for_each(strip_runtime),
        _ => {}
    }
}

fn cli(threads: usize, args: &[&str]) -> Vec<u8> {
    let out = Command::new(env!("CARGO_BIN_EXE_qmcdisc"))
        .arg("--threads")
        .arg(threads.to_string())
        .args(args)
        .output()
        .unwrap();
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out.stdout
}

fn json_sans_runtime(bytes: &[u8]) -> String {
    let mut v: Value = serde_json::from_slice(bytes).unwrap();
    strip_runtime(&mut v);
    serde_json::to_string(&v).unwrap()
}

#[test]
fn criterion_9_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n).to_string_lossy().into_owned();
    let (pts, fib, cfg) = (p("pts.csv"), p("fib.csv"), p("study.json"));
    std::fs::write(
        &cfg,
        r#"{"generator":{"kind":"random","d":2,"seed":9},"measure":{"kind":"smooth","r":1,"p1":2,"p2":2},
            "m_list":[64,128,256,512],"normalization":{"r":1,"log_power":0.5}}"#,
    )
    .unwrap();
    let mut mismatches = Vec::new();
    let mut runs = 0;
    let mut reference: Vec<Vec<u8>> = Vec::new();
    for (round, threads) in [1usize, 1, 4].into_iter().enumerate() {
        let mut outs = vec![
            cli(threads, &["gen", "--kind", "random", "--m", "300", "--d", "3", "--seed", "17"]),
            cli(threads, &["gen", "--kind", "frolov", "--m", "200", "--d", "2"]),
        ];
        cli(threads, &["gen", "--kind", "random", "--m", "200", "--d", "2", "--seed", "3", "--out", &pts]);
        cli(threads, &["gen", "--kind", "fibonacci", "--m", "233", "--out", &fib]);
        let reports = [
            cli(threads, &["disc", "--in", &pts, "--kind", "smooth", "--r", "1"]),
            cli(threads, &["disc", "--in", &pts, "--kind", "smooth", "--r", "2", "--trunc", "400"]),
            cli(threads, &["disc", "--in", &fib, "--kind", "smooth", "--r", "1", "--p2", "inf", "--z-nodes", "64", "--u-nodes", "8"]),
            cli(threads, &["disc", "--in", &pts, "--kind", "star"]),
            cli(threads, &["disc", "--in", &pts, "--kind", "l2"]),
            cli(threads, &["disc", "--in", &fib, "--kind", "cube", "--r", "2"]),
            cli(threads, &["diaphony", "--in", &pts, "--r", "2"]),
            cli(threads, &["diaphony", "--in", &fib, "--r", "1", "--q", "3", "--grid", "64"]),
            cli(threads, &["greedy", "--m", "40", "--pool", "128", "--grid", "512", "--report", "/dev/stdout"]),
            cli(threads, &["rates", "--config", &cfg]),
        ];
        outs.extend(reports.iter().map(|r| json_sans_runtime(r).into_bytes()));
        let trace = p(&format!("trace{round}.csv"));
        cli(threads, &["greedy", "--m", "40", "--pool-kind", "random", "--pool", "200", "--seed", "4", "--grid", "512", "--out", &p("g.csv"), "--trace", &trace]);
        outs.push(std::fs::read(&trace).unwrap());
        outs.push(std::fs::read(&p("g.csv")).unwrap());
        runs += outs.len();
        if reference.is_empty() {
            reference = outs;
        } else {
            for (i, (a, b)) in reference.iter().zip(&outs).enumerate() {
                if a != b {
                    mismatches.push(format!("output {i} differs at {threads} threads"));
                }
            }
        }
    }
    verdict(
        9,
        mismatches.is_empty(),
        format!("{runs} outputs over thread counts 1, 1, 4; mismatches: {mismatches:?}"),
    );
}
