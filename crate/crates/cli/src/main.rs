//! `adaptci`: adaptive confidence intervals for a regression function at a
//! point under coordinate-wise monotone Hölder classes.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use adaptci_cli::config::{parse_ladder, parse_usizes, parse_vector, LadderConfig};
use adaptci_cli::ingest::{ingest, IngestOptions, IngestedData};
use adaptci_cli::output::{
    sha256_hex, write_json, write_simulate_reports, CiOutput, PerLevelOut, RunRecord, TableMetric,
};
use adaptci_core::simulate::{benchmark_scenarios, run_scenario, MethodKind, BENCHMARK_HALF_WIDTH};
use adaptci_core::variance::{estimate_sigma2, rule_of_thumb_bandwidth};
use adaptci_core::{
    adaptive_onesided_lower, adaptive_onesided_upper, bonferroni_ci, calibrated_ci, check_nesting,
    dist, minimax_ci, modulus, tau_star, ClassLadder, Design, Error as CoreError, HolderClass,
    IndexSet, MonotoneNorm, OrderedPair,
};

#[derive(Parser)]
#[command(name = "adaptci", version, about = "Adaptive confidence intervals under monotone Hölder classes")]
struct Cli {
    /// Worker thread cap (also env ADAPTCI_THREADS); never changes results.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Confidence interval for f(0) from a data file.
    Ci(CiArgs),
    /// Ordered modulus of continuity between two ladder levels.
    Modulus(ModulusArgs),
    /// Monte Carlo reproduction of the benchmark tables.
    Simulate(SimArgs),
    /// Empirical convergence-rate check of the ordered modulus.
    RateCheck(RateArgs),
    /// Homoskedastic noise variance estimate.
    Sigma(SigmaArgs),
    /// Calibrated one-sided level tau* versus the naive Bonferroni split.
    Calibrate(CalibrateArgs),
}

#[derive(Args)]
struct DataOpts {
    /// CSV with header x1,...,xk,y and an optional sigma column.
    #[arg(long)]
    data: PathBuf,
    /// Query point "v1,...,vk" in original coordinates (default: origin).
    #[arg(long)]
    x0: Option<String>,
    /// Estimate a homoskedastic sigma when the file lacks a sigma column.
    #[arg(long)]
    estimate_sigma: bool,
    /// Kernel bandwidth for --estimate-sigma (default: rule of thumb).
    #[arg(long)]
    bandwidth: Option<f64>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Bonferroni,
    Calibrated,
    OnesidedLower,
    OnesidedUpper,
    Minimax,
}

#[derive(Args)]
struct CiArgs {
    #[command(flatten)]
    data: DataOpts,
    /// Ladder config JSON.
    #[arg(long)]
    classes: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, value_enum)]
    method: MethodArg,
    /// Ladder level for --method minimax: 1-based index, "first", or "last".
    #[arg(long)]
    level: Option<String>,
    #[arg(long, default_value_t = 100_000)]
    mc_draws: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Run even when the ladder fails the nesting check on this design.
    #[arg(long)]
    force: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ModulusArgs {
    #[command(flatten)]
    data: DataOpts,
    #[arg(long)]
    classes: PathBuf,
    /// 1-based ladder level of the "from" class.
    #[arg(long)]
    from: usize,
    /// 1-based ladder level of the "to" class.
    #[arg(long)]
    to: usize,
    /// Value separation b (solves for delta).
    #[arg(long, conflicts_with = "delta")]
    b: Option<f64>,
    /// Distance budget delta (solves for b).
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimArgs {
    /// Benchmark table: 1, 2, 4 report lengths; 3 reports coverage.
    #[arg(long)]
    table: u8,
    /// Comma-separated sample sizes.
    #[arg(long, default_value = "100,1000")]
    n: String,
    #[arg(long, default_value_t = 500)]
    reps: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Also run the calibrated interval (the costly method).
    #[arg(long)]
    with_calibrated: bool,
    #[arg(long, default_value_t = 100_000)]
    mc_draws: usize,
    /// Run the calibrated method only on every m-th iteration.
    #[arg(long, default_value_t = 1)]
    calibrated_subsample: usize,
    /// Output path; format from extension (.json, .md, .csv).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RateArgs {
    /// Hölder exponents "gamma1,gamma2" of the ordered pair.
    #[arg(long, default_value = "1,1")]
    gammas: String,
    /// Hölder constants "C1,C2".
    #[arg(long = "cs", alias = "Cs", default_value = "1,2")]
    cs: String,
    /// Comma-separated sample sizes.
    #[arg(long, default_value = "100,1000,10000,100000")]
    ns: String,
    /// Modulus budget delta (default z_0.95).
    #[arg(long)]
    delta: Option<f64>,
    /// Ambient dimension.
    #[arg(long, default_value_t = 2)]
    dim: usize,
    /// 1-based monotone coordinates, e.g. "1,2"; empty string for none.
    #[arg(long)]
    vset: Option<String>,
    /// Design half-width (uniform cube).
    #[arg(long, default_value_t = BENCHMARK_HALF_WIDTH)]
    half_width: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SigmaArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    bandwidth: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CalibrateArgs {
    #[command(flatten)]
    data: DataOpts,
    #[arg(long)]
    classes: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 100_000)]
    mc_draws: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    force: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads.or_else(|| {
        std::env::var("ADAPTCI_THREADS").ok().and_then(|v| v.parse().ok())
    }) {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("warning: could not configure thread pool: {e}");
        }
    }
    let started = Instant::now();
    let mut record = RunRecord::new(std::env::args().collect());
    let code = match dispatch(cli.cmd, &mut record) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err:#}");
            exit_code_for(&err)
        }
    };
    record.timing_ms = started.elapsed().as_millis();
    record.emit();
    std::process::exit(code);
}

/// 2 for validation problems, 3 for numerical failures.
fn exit_code_for(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if let Some(core) = cause.downcast_ref::<CoreError>() {
            return match core {
                CoreError::NoMassAtDelta { .. }
                | CoreError::DegenerateModulus
                | CoreError::AllZeroWeights { .. }
                | CoreError::NonConvergence { .. }
                | CoreError::DegenerateDof { .. }
                | CoreError::AllLevelsFailed { .. } => 3,
                _ => 2,
            };
        }
    }
    2
}

fn dispatch(cmd: Cmd, record: &mut RunRecord) -> Result<()> {
    match cmd {
        Cmd::Ci(args) => run_ci(args, record),
        Cmd::Modulus(args) => run_modulus(args, record),
        Cmd::Simulate(args) => run_simulate(args, record),
        Cmd::RateCheck(args) => run_rate_check(args, record),
        Cmd::Sigma(args) => run_sigma(args, record),
        Cmd::Calibrate(args) => run_calibrate(args, record),
    }
}

fn load_classes(path: &Path, record: &mut RunRecord) -> Result<LadderConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading classes file {}", path.display()))?;
    record.classes_sha256 = Some(sha256_hex(text.as_bytes()));
    parse_ladder(&text)
}

fn load_data(
    opts: &DataOpts,
    basis: Option<&[Vec<f64>]>,
    record: &mut RunRecord,
) -> Result<IngestedData> {
    let bytes = std::fs::read(&opts.data)
        .with_context(|| format!("reading data file {}", opts.data.display()))?;
    record.data_sha256 = Some(sha256_hex(&bytes));
    let x0 = opts.x0.as_deref().map(parse_vector).transpose()?;
    ingest(
        &opts.data,
        &IngestOptions {
            x0,
            basis,
            estimate_sigma: opts.estimate_sigma,
            bandwidth: opts.bandwidth,
        },
    )
}

fn ensure_nested(ladder: &ClassLadder, design: &Design, force: bool) -> Result<()> {
    let report = check_nesting(ladder, design);
    if report.ok {
        return Ok(());
    }
    let detail = report
        .witness
        .map(|w| {
            format!(
                "level {} exceeds the largest class at design pair ({}, {}), distance {:.6}: {:.6} > {:.6}",
                w.level, w.point_i, w.point_j, w.distance, w.small_class_bound, w.large_class_bound
            )
        })
        .unwrap_or_default();
    if force {
        log::warn!("ladder fails nesting on this design ({detail}); continuing due to --force");
        Ok(())
    } else {
        bail!("ladder is not nested on this design ({detail}); restrict the support or pass --force")
    }
}

fn parse_level(spec: &str, ladder_len: usize) -> Result<usize> {
    let j = match spec {
        "first" => 1,
        "last" => ladder_len,
        other => other.parse::<usize>().context("--level must be an index, 'first', or 'last'")?,
    };
    if j == 0 || j > ladder_len {
        bail!("--level {j} out of range 1..={ladder_len}");
    }
    Ok(j - 1)
}

fn level_entry(ladder: &ClassLadder, bound: &adaptci_core::OneSidedBound) -> PerLevelOut {
    let class = ladder.level(bound.level_index);
    let (lower, upper) = match bound.side {
        adaptci_core::Side::Lower => (Some(bound.value), None),
        adaptci_core::Side::Upper => (None, Some(bound.value)),
    };
    PerLevelOut {
        j: bound.level_index + 1,
        gamma: class.gamma(),
        c: class.constant(),
        lower,
        upper,
        active_points: Some(bound.active_points),
    }
}

fn run_ci(args: CiArgs, record: &mut RunRecord) -> Result<()> {
    record.seed = Some(args.seed);
    let cfg = load_classes(&args.classes, record)?;
    let data = load_data(&args.data, cfg.basis.as_deref(), record)?;
    let ladder = &cfg.ladder;
    if ladder.vset().dim() != data.dim {
        bail!("classes config is {}-dimensional but data has {} coordinates", ladder.vset().dim(), data.dim);
    }

    let needs_ladder = !matches!(args.method, MethodArg::Minimax);
    if needs_ladder {
        ensure_nested(ladder, &data.design, args.force)?;
    }

    let mut warnings = Vec::new();
    let out: CiOutput = match args.method {
        MethodArg::Bonferroni | MethodArg::Calibrated => {
            let ci = if args.method == MethodArg::Bonferroni {
                bonferroni_ci(&data.design, &data.y, ladder, args.alpha)?
            } else {
                calibrated_ci(&data.design, &data.y, ladder, args.alpha, args.mc_draws, args.seed)?
            };
            if ci.is_empty() {
                warnings.push("interval is empty (bounds crossed); reported unclamped".into());
            }
            if ci.tau_fallback {
                warnings.push("calibration fell back to the naive Bonferroni level".into());
            }
            for (j, reason) in &ci.skipped_levels {
                warnings.push(format!("level {} skipped: {reason}", j + 1));
            }
            let mut per_level = Vec::new();
            for lb in &ci.per_level {
                let class = ladder.level(lb.level);
                per_level.push(PerLevelOut {
                    j: lb.level + 1,
                    gamma: class.gamma(),
                    c: class.constant(),
                    lower: Some(lb.lower.value),
                    upper: Some(lb.upper.value),
                    active_points: Some(lb.lower.active_points.max(lb.upper.active_points)),
                });
            }
            CiOutput {
                lower: Some(ci.lower),
                upper: Some(ci.upper),
                length: Some(ci.length()),
                method: if args.method == MethodArg::Bonferroni {
                    "bonferroni".into()
                } else {
                    "calibrated".into()
                },
                tau: Some(ci.tau),
                per_level,
                seed: ci.seed,
                warnings,
            }
        }
        MethodArg::OnesidedLower => {
            let b = adaptive_onesided_lower(&data.design, &data.y, ladder, args.alpha)?;
            CiOutput {
                lower: Some(b.value),
                upper: None,
                length: None,
                method: "onesided-lower".into(),
                tau: Some(args.alpha / ladder.len() as f64),
                per_level: b.per_level.iter().map(|x| level_entry(ladder, x)).collect(),
                seed: None,
                warnings,
            }
        }
        MethodArg::OnesidedUpper => {
            let b = adaptive_onesided_upper(&data.design, &data.y, ladder, args.alpha)?;
            CiOutput {
                lower: None,
                upper: Some(b.value),
                length: None,
                method: "onesided-upper".into(),
                tau: Some(args.alpha / ladder.len() as f64),
                per_level: b.per_level.iter().map(|x| level_entry(ladder, x)).collect(),
                seed: None,
                warnings,
            }
        }
        MethodArg::Minimax => {
            let level_spec = args
                .level
                .as_deref()
                .ok_or_else(|| anyhow!("--method minimax requires --level (index, 'first', or 'last')"))?;
            let level = parse_level(level_spec, ladder.len())?;
            let ci = minimax_ci::minimax_fixed_ci_level(&data.design, &data.y, ladder, level, args.alpha)?;
            let class = ladder.level(level);
            CiOutput {
                lower: Some(ci.lower()),
                upper: Some(ci.upper()),
                length: Some(ci.length()),
                method: format!("minimax(level={})", level + 1),
                tau: None,
                per_level: vec![PerLevelOut {
                    j: level + 1,
                    gamma: class.gamma(),
                    c: class.constant(),
                    lower: Some(ci.lower()),
                    upper: Some(ci.upper()),
                    active_points: None,
                }],
                seed: None,
                warnings,
            }
        }
    };
    if let Some(path) = write_json(&out, args.out.as_deref())? {
        record.outputs.push(path);
    }
    Ok(())
}

#[derive(serde::Serialize)]
struct ModulusOut {
    b: f64,
    delta: f64,
    omega_prime: Option<f64>,
    #[serde(rename = "D_nonzero_count")]
    d_nonzero_count: usize,
}

fn run_modulus(args: ModulusArgs, record: &mut RunRecord) -> Result<()> {
    let cfg = load_classes(&args.classes, record)?;
    let data = load_data(&args.data, cfg.basis.as_deref(), record)?;
    let ladder = &cfg.ladder;
    let from = parse_level(&args.from.to_string(), ladder.len())?;
    let to = parse_level(&args.to.to_string(), ladder.len())?;
    let pair = OrderedPair::new(ladder.level(from).clone(), ladder.level(to).clone())?;
    let prob = modulus::ModulusProblem::new(&pair, &data.design)?;

    let out = match (args.b, args.delta) {
        (Some(b), None) => {
            if b < 0.0 {
                bail!("--b must be nonnegative");
            }
            let delta = prob.inverse(b);
            if delta > 0.0 {
                let sol = prob.solve(delta)?;
                ModulusOut {
                    b,
                    delta,
                    omega_prime: Some(sol.omega_prime),
                    d_nonzero_count: sol.active_points(),
                }
            } else {
                ModulusOut { b, delta: 0.0, omega_prime: None, d_nonzero_count: 0 }
            }
        }
        (None, Some(delta)) => {
            let sol = prob.solve(delta)?;
            ModulusOut {
                b: sol.b,
                delta,
                omega_prime: Some(sol.omega_prime),
                d_nonzero_count: sol.active_points(),
            }
        }
        _ => bail!("pass exactly one of --b or --delta"),
    };
    if let Some(path) = write_json(&out, args.out.as_deref())? {
        record.outputs.push(path);
    }
    Ok(())
}

fn run_simulate(args: SimArgs, record: &mut RunRecord) -> Result<()> {
    record.seed = Some(args.seed);
    let ns = parse_usizes(&args.n)?;
    if ns.is_empty() {
        bail!("--n needs at least one sample size");
    }
    let mut reports = Vec::new();
    for &n in &ns {
        for mut scenario in benchmark_scenarios(args.table, n, args.reps, args.seed)? {
            scenario.mc_draws = args.mc_draws;
            scenario.calibrated_subsample = args.calibrated_subsample;
            if args.with_calibrated && !scenario.methods.contains(&MethodKind::Calibrated) {
                scenario.methods.insert(1, MethodKind::Calibrated);
            }
            let report = run_scenario(&scenario)?;
            log::info!("{} finished in {} ms", report.label, report.wall_time_ms);
            reports.push(report);
        }
    }
    let metric = if args.table == 3 { TableMetric::Coverage } else { TableMetric::Length };
    if let Some(path) = write_simulate_reports(&reports, metric, args.out.as_deref())? {
        record.outputs.push(path);
    }
    Ok(())
}

fn run_rate_check(args: RateArgs, record: &mut RunRecord) -> Result<()> {
    record.seed = Some(args.seed);
    let gammas = parse_vector(&args.gammas)?;
    let cs = parse_vector(&args.cs)?;
    if gammas.len() != 2 || cs.len() != 2 {
        bail!("--gammas and --cs each need exactly two values");
    }
    let ns = parse_usizes(&args.ns)?;
    let vset = match args.vset.as_deref() {
        None => IndexSet::full(args.dim),
        Some("") => IndexSet::empty(args.dim),
        Some(spec) => {
            let idx: Vec<usize> =
                parse_usizes(spec).context("parsing --vset as 1-based indices")?;
            IndexSet::new(args.dim, &idx)?
        }
    };
    let norm = MonotoneNorm::euclidean(args.dim);
    let small = HolderClass::new(gammas[0], cs[0], vset.clone(), norm.clone())?;
    let big = HolderClass::new(gammas[1], cs[1], vset, norm)?;
    let delta = args.delta.unwrap_or_else(|| dist::normal_quantile(0.95));
    let rc = adaptci_core::simulate::rate_check(&small, &big, args.half_width, &ns, delta, args.seed)?;
    if let Some(path) = write_json(&rc, args.out.as_deref())? {
        record.outputs.push(path);
    }
    Ok(())
}

#[derive(serde::Serialize)]
struct SigmaOut {
    sigma2: f64,
    nu1: f64,
    nu2: f64,
    bandwidth: f64,
}

fn run_sigma(args: SigmaArgs, record: &mut RunRecord) -> Result<()> {
    let bytes = std::fs::read(&args.data)
        .with_context(|| format!("reading data file {}", args.data.display()))?;
    record.data_sha256 = Some(sha256_hex(&bytes));
    let data = ingest(
        &args.data,
        &IngestOptions { x0: None, basis: None, estimate_sigma: false, bandwidth: None },
    )
    .or_else(|_| {
        // Accept files without a sigma column here; that is the normal case.
        ingest(
            &args.data,
            &IngestOptions { x0: None, basis: None, estimate_sigma: true, bandwidth: args.bandwidth },
        )
    })?;
    let points: Vec<Vec<f64>> =
        (0..data.design.len()).map(|i| data.design.point(i).to_vec()).collect();
    let h = match args.bandwidth {
        Some(h) => h,
        None => rule_of_thumb_bandwidth(&points)?,
    };
    let (sigma2, trace) = estimate_sigma2(&points, &data.y, h)?;
    let out = SigmaOut { sigma2, nu1: trace.nu1, nu2: trace.nu2, bandwidth: trace.bandwidth };
    if let Some(path) = write_json(&out, args.out.as_deref())? {
        record.outputs.push(path);
    }
    Ok(())
}

#[derive(serde::Serialize)]
struct CalibrateOut {
    tau_star: f64,
    naive: f64,
    fallback: bool,
    alpha: f64,
    levels: usize,
}

fn run_calibrate(args: CalibrateArgs, record: &mut RunRecord) -> Result<()> {
    record.seed = Some(args.seed);
    let cfg = load_classes(&args.classes, record)?;
    let data = load_data(&args.data, cfg.basis.as_deref(), record)?;
    ensure_nested(&cfg.ladder, &data.design, args.force)?;
    let ts = tau_star(&data.design, &cfg.ladder, args.alpha, args.mc_draws, args.seed)?;
    let out = CalibrateOut {
        tau_star: ts.tau,
        naive: ts.naive,
        fallback: ts.fallback,
        alpha: args.alpha,
        levels: cfg.ladder.len(),
    };
    if let Some(path) = write_json(&out, args.out.as_deref())? {
        record.outputs.push(path);
    }
    Ok(())
}
