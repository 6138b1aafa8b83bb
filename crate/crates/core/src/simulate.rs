//! Monte Carlo harness: benchmark scenarios over the uniform square design,
//! coverage/length reports, the empirical rate check, and a synthetic
//! stand-in for the production-function workflow.
//!
//! Determinism contract: a `(Scenario, seed)` pair yields a bit-identical
//! report regardless of thread count. Each iteration draws from its own
//! ChaCha stream keyed by `(seed, iteration)` and aggregation runs in
//! iteration order.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::ci_adaptive::{bonferroni_ci, calibrated_ci};
use crate::error::{Error, Result};
use crate::function_class::{check_nesting, ClassLadder, HolderClass};
use crate::geometry::{norm_proj_plus, IndexSet, MonotoneNorm};
use crate::minimax_ci::{minimax_fixed_ci, minimax_fixed_ci_level};
use crate::modulus::{Design, ModulusProblem, OrderedPair};
use crate::numeric::mean_and_se;

/// Half-width of the benchmark design square `[−1/(2√2), 1/(2√2)]²`; its
/// diameter is exactly one, which keeps equal-constant ladders nested.
pub const BENCHMARK_HALF_WIDTH: f64 = 0.353_553_390_593_273_8;

/// True regression function of a benchmark scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Truth {
    /// Identically zero.
    F1,
    /// `‖(x)_{𝒱+}‖₂^γ` with every coordinate monotone.
    F2 { gamma: f64 },
    /// `‖(x)_{𝒱+}‖₂^{1/2}`.
    F3,
}

/// Evaluates the benchmark truth at `x`.
pub fn truth_eval(truth: Truth, x: &[f64]) -> f64 {
    let norm = MonotoneNorm::euclidean(x.len());
    let vset = IndexSet::full(x.len());
    match truth {
        Truth::F1 => 0.0,
        Truth::F2 { gamma } => norm_proj_plus(&norm, &vset, x).powf(gamma),
        Truth::F3 => norm_proj_plus(&norm, &vset, x).sqrt(),
    }
}

/// One interval method evaluated inside a scenario.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum MethodKind {
    Bonferroni,
    Calibrated,
    /// Fixed-length minimax benchmark for one ladder level (0-based).
    MinimaxLevel(usize),
    /// Fixed-length minimax benchmark for an ad-hoc class sharing the
    /// ladder's norm and index set.
    MinimaxClass { gamma: f64, c: f64 },
}

impl MethodKind {
    pub fn label(&self, ladder: &ClassLadder) -> String {
        match self {
            MethodKind::Bonferroni => "bonferroni".into(),
            MethodKind::Calibrated => "calibrated".into(),
            MethodKind::MinimaxLevel(j) => {
                format!("minimax(gamma={})", ladder.level(*j).gamma())
            }
            MethodKind::MinimaxClass { gamma, .. } => format!("minimax(gamma={gamma})"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub label: String,
    pub truth: Truth,
    pub n: usize,
    pub reps: usize,
    pub alpha: f64,
    pub ladder: ClassLadder,
    /// Design points are uniform on `[−half_width, half_width]^k`.
    pub design_half_width: f64,
    pub methods: Vec<MethodKind>,
    pub seed: u64,
    /// Monte Carlo draws for each calibration run.
    pub mc_draws: usize,
    /// Run the calibrated method only on every m-th iteration (1 = all).
    pub calibrated_subsample: usize,
}

impl Scenario {
    fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::InvalidInput("reps must be >= 1".into()));
        }
        if self.n == 0 || self.n > 10_000 {
            return Err(Error::InvalidInput(format!(
                "n = {} out of supported range 1..=10000 for simulation",
                self.n
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidInput("alpha must lie in (0,1)".into()));
        }
        if self.calibrated_subsample == 0 {
            return Err(Error::InvalidInput("calibrated_subsample must be >= 1".into()));
        }
        for m in &self.methods {
            if let MethodKind::MinimaxLevel(j) = m {
                if *j >= self.ladder.len() {
                    return Err(Error::InvalidInput(format!("minimax level {j} out of range")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MethodReport {
    pub label: String,
    pub mean_length: f64,
    pub se_length: f64,
    pub coverage: f64,
    pub se_coverage: f64,
    pub reps_used: usize,
    pub failures: usize,
}

/// Calibration diagnostics aggregated over iterations.
#[derive(Debug, Clone, Serialize)]
pub struct CalibrationSummary {
    /// Iterations where the calibrated CI was not inside the naive one.
    pub containment_violations: usize,
    pub min_tau: f64,
    pub naive_tau: f64,
    pub fallbacks: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimReport {
    pub label: String,
    pub n: usize,
    pub reps: usize,
    pub alpha: f64,
    pub seed: u64,
    pub per_method: Vec<MethodReport>,
    pub calibration: Option<CalibrationSummary>,
    /// Wall time is reported on stderr/logs only; keeping it out of the
    /// serialized report preserves byte-identical outputs across reruns.
    #[serde(skip_serializing)]
    pub wall_time_ms: u128,
}

struct RepOutcome {
    // (length, covered) per requested method, None when the method failed.
    results: Vec<Option<(f64, bool)>>,
    containment_ok: Option<bool>,
    tau: Option<f64>,
    fallback: bool,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn run_rep(s: &Scenario, rep: usize) -> RepOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    rng.set_stream(rep as u64 + 1);

    let k = s.ladder.vset().dim();
    let h = s.design_half_width;
    let points: Vec<Vec<f64>> =
        (0..s.n).map(|_| (0..k).map(|_| rng.gen_range(-h..h)).collect()).collect();
    let design = Design::with_unit_sigma(points).expect("valid draw");
    let y: Vec<f64> = (0..s.n)
        .map(|i| {
            truth_eval(s.truth, design.point(i)) + rng.sample::<f64, _>(StandardNormal)
        })
        .collect();
    let truth0 = truth_eval(s.truth, &vec![0.0; k]);

    let nesting_ok = check_nesting(&s.ladder, &design).ok;
    let mut results = Vec::with_capacity(s.methods.len());
    let mut bonf_interval = None;
    let mut cal_interval = None;
    let mut tau = None;
    let mut fallback = false;
    for m in &s.methods {
        let outcome = match m {
            MethodKind::Bonferroni => {
                if !nesting_ok {
                    None
                } else {
                    bonferroni_ci(&design, &y, &s.ladder, s.alpha).ok().map(|ci| {
                        let out = (ci.length(), ci.covers(truth0));
                        bonf_interval = Some((ci.lower, ci.upper));
                        out
                    })
                }
            }
            MethodKind::Calibrated => {
                if !nesting_ok || rep % s.calibrated_subsample != 0 {
                    None
                } else {
                    let cal_seed = splitmix64(s.seed ^ (rep as u64).wrapping_add(1));
                    calibrated_ci(&design, &y, &s.ladder, s.alpha, s.mc_draws, cal_seed)
                        .ok()
                        .map(|ci| {
                            let out = (ci.length(), ci.covers(truth0));
                            cal_interval = Some((ci.lower, ci.upper));
                            tau = Some(ci.tau);
                            fallback = ci.tau_fallback;
                            out
                        })
                }
            }
            MethodKind::MinimaxLevel(j) => minimax_fixed_ci_level(&design, &y, &s.ladder, *j, s.alpha)
                .ok()
                .map(|ci| (ci.length(), ci.covers(truth0))),
            MethodKind::MinimaxClass { gamma, c } => {
                HolderClass::new(*gamma, *c, s.ladder.vset().clone(), s.ladder.norm().clone())
                    .and_then(|class| minimax_fixed_ci(&design, &y, &class, s.alpha))
                    .ok()
                    .map(|ci| (ci.length(), ci.covers(truth0)))
            }
        };
        results.push(outcome);
    }

    let containment_ok = match (bonf_interval, cal_interval) {
        (Some((bl, bu)), Some((cl, cu))) => Some(cl >= bl - 1e-9 && cu <= bu + 1e-9),
        _ => None,
    };
    RepOutcome { results, containment_ok, tau, fallback }
}

/// Runs a scenario: per iteration draw a design, draw Gaussian noise,
/// compute every requested interval, and record length and coverage of the
/// true value at the origin.
pub fn run_scenario(s: &Scenario) -> Result<SimReport> {
    s.validate()?;
    let started = std::time::Instant::now();

    let outcomes: Vec<RepOutcome> = (0..s.reps).into_par_iter().map(|rep| run_rep(s, rep)).collect();

    let mut per_method = Vec::with_capacity(s.methods.len());
    for (mi, m) in s.methods.iter().enumerate() {
        let expected: usize = match m {
            MethodKind::Calibrated => (0..s.reps).filter(|r| r % s.calibrated_subsample == 0).count(),
            _ => s.reps,
        };
        let mut lengths = Vec::new();
        let mut covers = Vec::new();
        for o in &outcomes {
            if let Some((len, cov)) = o.results[mi] {
                lengths.push(len);
                covers.push(if cov { 1.0 } else { 0.0 });
            }
        }
        let (mean_length, se_length) = mean_and_se(&lengths);
        let (coverage, se_coverage) = mean_and_se(&covers);
        per_method.push(MethodReport {
            label: m.label(&s.ladder),
            mean_length,
            se_length,
            coverage,
            se_coverage,
            reps_used: lengths.len(),
            failures: expected.saturating_sub(lengths.len()),
        });
    }

    let calibration = if s.methods.contains(&MethodKind::Calibrated) {
        let mut violations = 0;
        let mut min_tau = f64::INFINITY;
        let mut fallbacks = 0;
        for o in &outcomes {
            if o.containment_ok == Some(false) {
                violations += 1;
            }
            if let Some(t) = o.tau {
                min_tau = min_tau.min(t);
            }
            if o.fallback {
                fallbacks += 1;
            }
        }
        Some(CalibrationSummary {
            containment_violations: violations,
            min_tau,
            naive_tau: s.alpha / (2.0 * s.ladder.len() as f64),
            fallbacks,
        })
    } else {
        None
    };

    Ok(SimReport {
        label: s.label.clone(),
        n: s.n,
        reps: s.reps,
        alpha: s.alpha,
        seed: s.seed,
        per_method,
        calibration,
        wall_time_ms: started.elapsed().as_millis(),
    })
}

/// Two-level benchmark ladder: `γ = (1, 10⁻³)`, `C = 1`, all coordinates
/// monotone, Euclidean norm.
pub fn benchmark_two_level_ladder() -> ClassLadder {
    let norm = MonotoneNorm::euclidean(2);
    let v = IndexSet::full(2);
    ClassLadder::new(vec![
        HolderClass::new(1.0, 1.0, v.clone(), norm.clone()).unwrap(),
        HolderClass::new(1e-3, 1.0, v, norm).unwrap(),
    ])
    .unwrap()
}

/// Six-level benchmark ladder: `γ_j = 1 − (j−1)/5` for `j ≤ 5` and
/// `γ₆ = 10⁻³`, `C = 1`.
pub fn benchmark_six_level_ladder() -> ClassLadder {
    let norm = MonotoneNorm::euclidean(2);
    let v = IndexSet::full(2);
    let mut levels = Vec::new();
    for j in 1..=5 {
        let g = 1.0 - (j as f64 - 1.0) / 5.0;
        levels.push(HolderClass::new(g, 1.0, v.clone(), norm.clone()).unwrap());
    }
    levels.push(HolderClass::new(1e-3, 1.0, v, norm).unwrap());
    ClassLadder::new(levels).unwrap()
}

/// Scenarios reproducing the benchmark tables (1, 2, 4: lengths; 3:
/// coverage under both truths).
pub fn benchmark_scenarios(table: u8, n: usize, reps: usize, seed: u64) -> Result<Vec<Scenario>> {
    let base = |label: String, truth, ladder: ClassLadder, methods| Scenario {
        label,
        truth,
        n,
        reps,
        alpha: 0.05,
        ladder,
        design_half_width: BENCHMARK_HALF_WIDTH,
        methods,
        seed,
        mc_draws: 100_000,
        calibrated_subsample: 1,
    };
    match table {
        1 => Ok(vec![base(
            format!("lengths-f1-n{n}"),
            Truth::F1,
            benchmark_two_level_ladder(),
            vec![MethodKind::Bonferroni, MethodKind::MinimaxLevel(1), MethodKind::MinimaxLevel(0)],
        )]),
        2 => Ok(vec![base(
            format!("lengths-f2-n{n}"),
            Truth::F2 { gamma: 1e-3 },
            benchmark_two_level_ladder(),
            vec![MethodKind::Bonferroni, MethodKind::MinimaxLevel(1)],
        )]),
        3 => Ok(vec![
            base(
                format!("coverage-f1-n{n}"),
                Truth::F1,
                benchmark_two_level_ladder(),
                vec![MethodKind::Bonferroni],
            ),
            base(
                format!("coverage-f2-n{n}"),
                Truth::F2 { gamma: 1e-3 },
                benchmark_two_level_ladder(),
                vec![MethodKind::Bonferroni],
            ),
        ]),
        4 => Ok(vec![base(
            format!("lengths-f3-n{n}"),
            Truth::F3,
            benchmark_six_level_ladder(),
            vec![
                MethodKind::Bonferroni,
                MethodKind::MinimaxLevel(5),
                MethodKind::MinimaxClass { gamma: 0.5, c: 1.0 },
            ],
        )]),
        _ => Err(Error::InvalidInput(format!("unknown table {table}; expected 1..=4"))),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RateCheck {
    /// Least-squares slope of `log ω(δ)` on `log n`.
    pub empirical_slope: f64,
    /// `−r(γ₁, γ₂) = −1/(2 + k₊/γ₁ + (k−k₊)/γ₂)`.
    pub theoretical_slope: f64,
    pub per_n: Vec<(usize, f64)>,
}

/// Empirical convergence-rate check for the ordered modulus
/// `ω(δ, ℱ₁, ℱ₂)` under designs drawn uniformly on the benchmark square.
pub fn rate_check(
    small: &HolderClass,
    big: &HolderClass,
    half_width: f64,
    n_grid: &[usize],
    delta: f64,
    seed: u64,
) -> Result<RateCheck> {
    if n_grid.len() < 2 {
        return Err(Error::InvalidInput("need at least two sample sizes".into()));
    }
    if n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidInput("sample sizes must be strictly increasing".into()));
    }
    let pair = OrderedPair::new(small.clone(), big.clone())?;
    let k = small.dim();

    let per_n: Vec<(usize, f64)> = n_grid
        .par_iter()
        .enumerate()
        .map(|(gi, &n)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(gi as u64 + 1);
            let points: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..k).map(|_| rng.gen_range(-half_width..half_width)).collect())
                .collect();
            let design = Design::with_unit_sigma(points)?;
            let sol = ModulusProblem::new(&pair, &design)?.solve(delta)?;
            Ok((n, sol.b))
        })
        .collect::<Result<Vec<_>>>()?;

    let xs: Vec<f64> = per_n.iter().map(|(n, _)| (*n as f64).ln()).collect();
    let ys: Vec<f64> = per_n.iter().map(|(_, w)| w.ln()).collect();
    let mx = xs.iter().sum::<f64>() / xs.len() as f64;
    let my = ys.iter().sum::<f64>() / ys.len() as f64;
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        num += (x - mx) * (y - my);
        den += (x - mx) * (x - mx);
    }
    let k_plus = small.vset().count() as f64;
    let k = k as f64;
    let r = 1.0 / (2.0 + k_plus / small.gamma() + (k - k_plus) / big.gamma());
    Ok(RateCheck { empirical_slope: num / den, theoretical_slope: -r, per_n })
}

/// Synthetic production-function-style dataset (log capital, log labor,
/// log output) whose summary ranges match the published firm-level summary
/// statistics; the real dataset is not redistributable.
#[derive(Debug, Clone, Serialize)]
pub struct ProductionData {
    pub log_capital: Vec<f64>,
    pub log_labor: Vec<f64>,
    pub log_output: Vec<f64>,
}

pub const CAPITAL_RANGE: (f64, f64) = (7.463, 14.226);
pub const LABOR_RANGE: (f64, f64) = (3.664, 9.142);
pub const OUTPUT_RANGE: (f64, f64) = (6.472, 13.233);

pub fn synthetic_production_data(n: usize, seed: u64) -> ProductionData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let clip = |v: f64, r: (f64, f64)| v.clamp(r.0, r.1);
    let mut log_capital = Vec::with_capacity(n);
    let mut log_labor = Vec::with_capacity(n);
    let mut log_output = Vec::with_capacity(n);
    for _ in 0..n {
        let zk: f64 = rng.sample(StandardNormal);
        let zl: f64 = rng.sample(StandardNormal);
        let zy: f64 = rng.sample(StandardNormal);
        let k = clip(10.818 + 1.1 * zk, CAPITAL_RANGE);
        let l = clip(6.352 + 0.6 * zk + 0.67 * zl, LABOR_RANGE);
        // Monotone technology plus noise, clipped into the published range.
        let y = clip(2.67 + 0.35 * k + 0.55 * l + 0.5 * zy, OUTPUT_RANGE);
        log_capital.push(k);
        log_labor.push(l);
        log_output.push(y);
    }
    ProductionData { log_capital, log_labor, log_output }
}
