use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use qmc_discrepancy::generators::{fibonacci_index, GeneratorSpec};
use qmc_discrepancy::greedy::{ia_run, rate_guarantee, KernelDict, KernelKind, PoolSpec, ScheduleParams};
use qmc_discrepancy::harness::{run_study, write_report, Measure, MethodSpec, StudyConfig};
use qmc_discrepancy::kernels::SmoothOrder;
use qmc_discrepancy::pointset::{format_pointset, load_pointset, save_pointset};
use qmc_discrepancy::{Error, Exponent, Result};

#[derive(Parser)]
#[command(name = "qmcdisc", version, about = "Discrepancy, diaphony and greedy cubature tools")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a point set.
    Gen(GenArgs),
    /// Discrepancy of a point set.
    Disc(DiscArgs),
    /// (r,q)-diaphony of a point set.
    Diaphony(DiaphonyArgs),
    /// Greedy knot construction.
    Greedy(GreedyArgs),
    /// Rate study from a JSON config.
    Rates(RatesArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum GenKind {
    Random,
    Grid,
    Fibonacci,
    Korobov,
    Frolov,
    AnchoredAxis,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum)]
    kind: GenKind,
    /// Number of points (a Fibonacci number for `fibonacci`, a d-th power for `grid`, a target for `frolov`).
    #[arg(long)]
    m: usize,
    #[arg(long, default_value_t = 2)]
    d: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Korobov multiplier.
    #[arg(long)]
    a: Option<u64>,
    /// Drop Frolov points that leave the cube instead of wrapping them.
    #[arg(long)]
    frolov_clip: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum DiscKind {
    Star,
    L2,
    Lq,
    Rdisc,
    Smooth,
    Cube,
    Fixedvol,
    #[value(name = "lemma31")]
    WeightedSum,
    AnchoredCube,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Closed,
    Truncated,
    Grid,
    SupRefine,
}

#[derive(Args)]
struct DiscArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, value_enum)]
    kind: DiscKind,
    #[arg(long, default_value_t = 1)]
    r: u32,
    #[arg(long, default_value = "2")]
    p1: Exponent,
    #[arg(long, default_value = "2")]
    p2: Exponent,
    /// Exponent for `lq` and `rdisc`.
    #[arg(long, default_value = "2")]
    q: Exponent,
    #[arg(long, value_enum)]
    method: Option<Method>,
    /// Hyperbolic-cross level for truncated sums.
    #[arg(long)]
    trunc: Option<u64>,
    #[arg(long)]
    z_nodes: Option<usize>,
    #[arg(long)]
    u_nodes: Option<usize>,
    #[arg(long, default_value_t = 1)]
    sup_refine_depth: u32,
    /// Grid nodes per axis for `lq`, `rdisc`, `fixedvol` and `anchored-cube`.
    #[arg(long)]
    grid: Option<usize>,
    /// Box volume for `fixedvol`.
    #[arg(long)]
    v: Option<f64>,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct DiaphonyArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value_t = 1)]
    r: u32,
    #[arg(long, default_value = "2")]
    q: Exponent,
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    /// Comma-separated phase shifts, one per dimension.
    #[arg(long, value_delimiter = ',')]
    alpha: Option<Vec<f64>>,
    #[arg(long)]
    trunc: Option<u64>,
    /// Evaluation grid nodes per axis for q != 2 or shifted variants.
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum GreedyKernel {
    #[value(alias = "frα", alias = "fralpha")]
    FrAlpha,
    Indicator,
}

#[derive(Clone, Copy, ValueEnum)]
enum PoolKind {
    Grid,
    Random,
}

#[derive(Args)]
struct GreedyArgs {
    #[arg(long, value_enum, default_value = "fr-alpha")]
    kernel: GreedyKernel,
    #[arg(long, default_value_t = 2)]
    r: u32,
    #[arg(long, default_value_t = 0.0)]
    alpha: f64,
    #[arg(long, default_value_t = 2.0)]
    s: f64,
    #[arg(long, default_value_t = 1)]
    d: usize,
    #[arg(long)]
    m: usize,
    #[arg(long, default_value_t = 512)]
    pool: usize,
    #[arg(long, value_enum, default_value = "grid")]
    pool_kind: PoolKind,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 2048)]
    grid: usize,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    /// Indicator box as `lo:hi` per axis, comma-separated; repeat for a union.
    #[arg(long = "box")]
    boxes: Vec<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct RatesArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Serialize)]
struct DiscReport {
    kind: &'static str,
    r: Option<u32>,
    p1: Option<Exponent>,
    p2: Option<Exponent>,
    q: Option<Exponent>,
    m: usize,
    d: usize,
    value: f64,
    tail_bound: f64,
    method: &'static str,
    grid: Option<serde_json::Value>,
    runtime_ms: f64,
}

fn emit(text: String, path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("report serializes") + "\n"
}

fn cmd_gen(a: &GenArgs) -> Result<()> {
    let spec = match a.kind {
        GenKind::Random => GeneratorSpec::Random { m: a.m, d: a.d, seed: a.seed },
        GenKind::Grid => {
            let n = (a.m as f64).powf(1.0 / a.d.max(1) as f64).round() as usize;
            if n.checked_pow(a.d as u32) != Some(a.m) {
                return Err(Error::InvalidParameter(format!("grid needs m = n^d, got m={} d={}", a.m, a.d)));
            }
            GeneratorSpec::Grid { n, d: a.d }
        }
        GenKind::Fibonacci => GeneratorSpec::Fibonacci {
            n: fibonacci_index(a.m as u64)
                .ok_or_else(|| Error::InvalidParameter(format!("{} is not a Fibonacci number", a.m)))?,
        },
        GenKind::Korobov => GeneratorSpec::Korobov {
            m: a.m as u64,
            a: a.a.unwrap_or_else(|| qmc_discrepancy::harness::korobov_multiplier(a.m as u64)),
            d: a.d,
        },
        GenKind::Frolov => GeneratorSpec::Frolov { n_target: a.m, d: a.d, clip: a.frolov_clip },
        GenKind::AnchoredAxis => GeneratorSpec::AnchoredAxis { m: a.m, d: a.d },
    };
    let cf = spec.generate()?;
    emit(format_pointset(&cf), a.out.as_deref())
}

fn disc_measure(a: &DiscArgs) -> Result<Measure> {
    let need_grid = |what: &str| a.grid.ok_or_else(|| Error::InvalidParameter(format!("{what} needs --grid")));
    let smooth_method = || -> Result<MethodSpec> {
        let l2 = a.p1 == Exponent::Finite(2.0) && a.p2 == Exponent::Finite(2.0);
        let method = a.method.unwrap_or(match (a.trunc, l2) {
            (Some(_), _) => Method::Truncated,
            (None, true) => Method::Closed,
            (None, false) if a.p1.is_infinite() || a.p2.is_infinite() => Method::SupRefine,
            (None, false) => Method::Grid,
        });
        Ok(match method {
            Method::Closed => MethodSpec::Closed,
            Method::Truncated => MethodSpec::Truncated {
                level: a.trunc.ok_or_else(|| Error::InvalidParameter("truncated method needs --trunc".into()))?,
            },
            Method::Grid => MethodSpec::Grid { z_nodes: a.z_nodes, u_nodes: a.u_nodes },
            Method::SupRefine => {
                MethodSpec::SupRefine { z_nodes: a.z_nodes, u_nodes: a.u_nodes, depth: a.sup_refine_depth }
            }
        })
    };
    Ok(match a.kind {
        DiscKind::Star => Measure::Star,
        DiscKind::L2 => Measure::L2,
        DiscKind::Lq => Measure::Lq { q: a.q, grid: a.grid.unwrap_or(256) },
        DiscKind::Rdisc => Measure::Rdisc { r: a.r, q: a.q, grid: a.grid },
        DiscKind::Smooth => Measure::Smooth { r: a.r, p1: a.p1, p2: a.p2, method: smooth_method()? },
        DiscKind::Cube => Measure::Cube { r: a.r, p1: a.p1, p2: a.p2, method: smooth_method()? },
        DiscKind::Fixedvol => Measure::Fixedvol {
            r: a.r,
            v: a.v.ok_or_else(|| Error::InvalidParameter("fixedvol needs --v".into()))?,
            p1: a.p1,
            z_nodes: a.z_nodes.or(a.grid).unwrap_or(64),
        },
        DiscKind::WeightedSum => Measure::WeightedSum { t: a.r, level: a.trunc },
        DiscKind::AnchoredCube => Measure::AnchoredCubeSup { grid: need_grid("anchored-cube")? },
    })
}

fn cmd_disc(a: &DiscArgs) -> Result<()> {
    let cf = load_pointset(&a.input)?;
    let measure = disc_measure(a)?;
    let t0 = Instant::now();
    let b = measure.evaluate(&cf)?;
    let runtime_ms = t0.elapsed().as_secs_f64() * 1e3;
    let smooth = matches!(a.kind, DiscKind::Smooth | DiscKind::Cube);
    let report = DiscReport {
        kind: measure.name(),
        r: (!matches!(a.kind, DiscKind::Star | DiscKind::L2 | DiscKind::Lq | DiscKind::AnchoredCube)).then_some(a.r),
        p1: (smooth || a.kind == DiscKind::Fixedvol).then_some(a.p1),
        p2: smooth.then_some(a.p2),
        q: matches!(a.kind, DiscKind::Lq | DiscKind::Rdisc).then_some(a.q),
        m: cf.m(),
        d: cf.d(),
        value: b.value,
        tail_bound: b.tail_bound,
        method: measure.method_name(),
        grid: measure.grid_echo(cf.d()),
        runtime_ms,
    };
    emit(to_json(&report), a.report.as_deref())
}

fn cmd_diaphony(a: &DiaphonyArgs) -> Result<()> {
    let cf = load_pointset(&a.input)?;
    let d = cf.d();
    let plain = a.alpha.as_ref().map_or(true, |al| al.iter().all(|&x| x == 0.0));
    let measure = if a.q == Exponent::Finite(2.0) && a.c == 1.0 && plain && a.grid.is_none() {
        Measure::Diaphony { r: a.r, level: a.trunc }
    } else {
        let default_grid = match d {
            1 => 4096,
            2 => 256,
            _ => 32,
        };
        Measure::Gnorm {
            r: a.r,
            alpha: a.alpha.clone(),
            c: a.c,
            q: a.q,
            grid: a.grid.unwrap_or(default_grid),
            level: a.trunc,
        }
    };
    let t0 = Instant::now();
    let b = measure.evaluate(&cf)?;
    let report = json!({
        "kind": measure.name(),
        "r": a.r,
        "q": a.q,
        "c": a.c,
        "alpha": a.alpha.clone().unwrap_or_else(|| vec![0.0; d]),
        "m": cf.m(),
        "d": d,
        "value": b.value,
        "tail_bound": b.tail_bound,
        "method": measure.method_name(),
        "grid": measure.grid_echo(d),
        "runtime_ms": t0.elapsed().as_secs_f64() * 1e3,
    });
    emit(to_json(&report), a.report.as_deref())
}

fn parse_box(spec: &str, d: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let bad = || Error::InvalidParameter(format!("box {spec:?}: expected {d} comma-separated lo:hi pairs"));
    let mut lo = Vec::with_capacity(d);
    let mut hi = Vec::with_capacity(d);
    for part in spec.split(',') {
        let (a, b) = part.split_once(':').ok_or_else(bad)?;
        let (a, b): (f64, f64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
        if !(0.0 <= a && a <= b && b <= 1.0) {
            return Err(bad());
        }
        lo.push(a);
        hi.push(b);
    }
    if lo.len() != d {
        return Err(bad());
    }
    Ok((lo, hi))
}

fn cmd_greedy(a: &GreedyArgs) -> Result<()> {
    let kind = match a.kernel {
        GreedyKernel::FrAlpha => KernelKind::Translation(SmoothOrder::new(a.r, vec![a.alpha; a.d])?),
        GreedyKernel::Indicator => {
            if a.boxes.is_empty() {
                return Err(Error::InvalidParameter("indicator kernel needs at least one --box".into()));
            }
            KernelKind::Indicator(a.boxes.iter().map(|b| parse_box(b, a.d)).collect::<Result<_>>()?)
        }
    };
    let pool = match a.pool_kind {
        PoolKind::Grid => PoolSpec::Grid { size: a.pool },
        PoolKind::Random => PoolSpec::Random { size: a.pool, seed: a.seed },
    };
    let t0 = Instant::now();
    let dict = KernelDict::build(&kind, a.d, &pool, a.grid, a.s)?;
    let sp = ScheduleParams::new(a.beta, a.s)?;
    let out = ia_run(&dict, &sp, a.m)?;
    if let Some(p) = &a.out {
        save_pointset(&out.formula, p)?;
    }
    if let Some(p) = &a.trace {
        std::fs::write(p, out.trace.to_csv())?;
    }
    let last = out.trace.steps.last().map_or(f64::NAN, |s| s.residual_norm);
    let report = json!({
        "kernel": match a.kernel { GreedyKernel::FrAlpha => "fr_alpha", GreedyKernel::Indicator => "indicator" },
        "r": a.r,
        "alpha": a.alpha,
        "s": a.s,
        "d": a.d,
        "m": out.formula.m(),
        "pool": a.pool,
        "grid": a.grid,
        "beta": a.beta,
        "scale": dict.scale(),
        "residual_norm": last,
        "residual_norm_unnormalized": last * dict.scale(),
        "rate_guarantee": rate_guarantee(&sp, out.formula.m()),
        "exact_at": out.trace.exact_at,
        "runtime_ms": t0.elapsed().as_secs_f64() * 1e3,
    });
    match (&a.report, &a.out) {
        (Some(p), _) => emit(to_json(&report), Some(p)),
        (None, Some(_)) => emit(to_json(&report), None),
        (None, None) => emit(format_pointset(&out.formula), None),
    }
}

fn cmd_rates(a: &RatesArgs) -> Result<()> {
    let text = std::fs::read_to_string(&a.config)?;
    let cfg: StudyConfig =
        serde_json::from_str(&text).map_err(|e| Error::InvalidParameter(format!("study config: {e}")))?;
    let report = run_study(&cfg)?;
    let json_path = a.report.clone().or(cfg.report.clone());
    let csv_path = a.csv.clone().or(cfg.csv.clone());
    match json_path {
        Some(p) => write_report(&report, cfg.normalization, &p, csv_path.as_deref()),
        None => {
            if let Some(c) = csv_path {
                std::fs::write(c, qmc_discrepancy::harness::report_csv(&report, cfg.normalization))?;
            }
            emit(to_json(&report), None)
        }
    }
}

fn run(args: Vec<OsString>) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: thread pool: {e}");
            return 2;
        }
    }
    let res = match &cli.cmd {
        Cmd::Gen(a) => cmd_gen(a),
        Cmd::Disc(a) => cmd_disc(a),
        Cmd::Diaphony(a) => cmd_diaphony(a),
        Cmd::Greedy(a) => cmd_greedy(a),
        Cmd::Rates(a) => cmd_rates(a),
    };
    match res {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numerical_guard() {
                3
            } else {
                2
            }
        }
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    std::process::exit(run(std::env::args_os().collect()));
}
