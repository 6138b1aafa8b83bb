//! Two-sided adaptive confidence intervals: naive Bonferroni intersection
//! and the correlation-aware calibration of the common one-sided level.
//!
//! The naive interval intersects, over ladder levels `j`, the two-sided
//! intervals `[ĉ^{ℓ,j}, ĉ^{u,j}]` each computed at per-bound level
//! `α/(2J)`. Calibration keeps the naive modulus budget
//! `δ̲ = z_{1−α/(2J)}` for every bound and relaxes only the critical value:
//! it finds the largest `τ` such that the maximum of the `2J` standardized
//! bound statistics exceeds `z_{1−τ}` with probability at most `α`,
//! estimated by Monte Carlo on the Gaussian vector with the statistics'
//! known covariance. Because only the quantile moves, each calibrated bound
//! equals its naive counterpart shifted inward by
//! `(z_{1−α/2J} − z_{1−τ*})·ω′`, so the calibrated interval always nests
//! inside the naive one, and the statistics (hence their covariance) do not
//! depend on `τ` at all.
//!
//! Writing `V_j` for the standardized lower statistic of level `j` and
//! `W_j` for the upper one, the covariance entries are inner products of
//! hinge-weight vectors scaled by `1/z²_{1−τ}`, with a sign flip on the
//! `V`–`W` cross block: the upper statistic is anti-monotone in its
//! estimator. The flip is what makes a single level reduce to the familiar
//! two-sided interval (coverage `1 − 2τ`, so `τ* = α/2`).

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::ci_onesided::{bounds_from_problems, OneSidedBound};
use crate::dist::normal_quantile;
use crate::error::{Error, Result};
use crate::function_class::ClassLadder;
use crate::modulus::{Design, ModulusProblem, OrderedPair};
use crate::numeric::CompensatedSum;

/// How the per-bound one-sided level was chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CiMethod {
    Bonferroni,
    Calibrated,
}

/// Per-level pair of one-sided bounds retained for diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct LevelBounds {
    /// 0-based ladder level.
    pub level: usize,
    pub lower: OneSidedBound,
    pub upper: OneSidedBound,
}

/// Intersected adaptive interval.
#[derive(Debug, Clone, Serialize)]
pub struct AdaptiveCI {
    /// `max_j ĉ^{ℓ,j}`.
    pub lower: f64,
    /// `min_j ĉ^{u,j}`.
    pub upper: f64,
    pub per_level: Vec<LevelBounds>,
    /// Levels dropped because their bound computation failed, with reasons.
    pub skipped_levels: Vec<(usize, String)>,
    /// Common per-bound one-sided level actually used.
    pub tau: f64,
    pub method: CiMethod,
    pub seed: Option<u64>,
    pub mc_draws: Option<usize>,
    /// True when calibration fell back to the naive level after a
    /// covariance repair failure.
    pub tau_fallback: bool,
}

impl AdaptiveCI {
    /// Crossed bounds mean the intersection is empty; reported, not clamped.
    pub fn is_empty(&self) -> bool {
        self.lower > self.upper
    }

    /// Lebesgue measure of the interval (zero when empty).
    pub fn length(&self) -> f64 {
        (self.upper - self.lower).max(0.0)
    }

    pub fn covers(&self, value: f64) -> bool {
        self.lower <= value && value <= self.upper
    }
}

/// Worst-case length inflation of the naive Bonferroni interval relative to
/// the single two-sided benchmark: `2 z_{1−α/2J} / z_{1−α/2}`.
pub fn adaptivity_constant(alpha: f64, levels: usize) -> f64 {
    assert!(levels >= 1, "need at least one level");
    assert!(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0,1)");
    let j = levels as f64;
    2.0 * normal_quantile(1.0 - alpha / (2.0 * j)) / normal_quantile(1.0 - alpha / 2.0)
}

/// The 2J modulus problems behind the adaptive interval: for each level the
/// lower direction `(ℱ_J → ℱ_j)` and the upper direction `(ℱ_j → ℱ_J)`.
struct DirectionSet {
    lower: Vec<ModulusProblem>,
    upper: Vec<ModulusProblem>,
}

impl DirectionSet {
    fn new(design: &Design, ladder: &ClassLadder) -> Result<Self> {
        let big = ladder.largest();
        let mut lower = Vec::with_capacity(ladder.len());
        let mut upper = Vec::with_capacity(ladder.len());
        for level in ladder.levels() {
            let lo_pair = OrderedPair::new(big.clone(), level.clone())?;
            let up_pair = OrderedPair::new(level.clone(), big.clone())?;
            lower.push(ModulusProblem::new(&lo_pair, design)?);
            upper.push(ModulusProblem::new(&up_pair, design)?);
        }
        Ok(Self { lower, upper })
    }
}

fn validate_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidInput(format!("alpha = {alpha} must lie in (0, 1)")));
    }
    Ok(())
}

fn intersect(
    dirs: &DirectionSet,
    design: &Design,
    y: &[f64],
    tau: f64,
    budget_delta: f64,
) -> Result<(f64, f64, Vec<LevelBounds>, Vec<(usize, String)>)> {
    let mut per_level = Vec::with_capacity(dirs.lower.len());
    let mut skipped = Vec::new();
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    let mut last_err = String::new();
    for j in 0..dirs.lower.len() {
        match bounds_from_problems(&dirs.lower[j], &dirs.upper[j], design, y, tau, budget_delta, j) {
            Ok((l, u)) => {
                lo = lo.max(l.value);
                hi = hi.min(u.value);
                per_level.push(LevelBounds { level: j, lower: l, upper: u });
            }
            Err(e) => {
                log::warn!("level {} skipped: {e}", j + 1);
                last_err = e.to_string();
                skipped.push((j, last_err.clone()));
            }
        }
    }
    if per_level.is_empty() {
        return Err(Error::AllLevelsFailed { levels: dirs.lower.len(), last_error: last_err });
    }
    Ok((lo, hi, per_level, skipped))
}

/// Naive Bonferroni adaptive CI: per-bound level `α/(2J)`.
///
/// Callers are expected to have validated ladder nesting on this design
/// (see [`crate::function_class::check_nesting`]); the CLI and the
/// simulation harness both do.
pub fn bonferroni_ci(
    design: &Design,
    y: &[f64],
    ladder: &ClassLadder,
    alpha: f64,
) -> Result<AdaptiveCI> {
    validate_alpha(alpha)?;
    let dirs = DirectionSet::new(design, ladder)?;
    let tau = alpha / (2.0 * ladder.len() as f64);
    let budget = normal_quantile(1.0 - tau);
    let (lower, upper, per_level, skipped_levels) = intersect(&dirs, design, y, tau, budget)?;
    Ok(AdaptiveCI {
        lower,
        upper,
        per_level,
        skipped_levels,
        tau,
        method: CiMethod::Bonferroni,
        seed: None,
        mc_draws: None,
        tau_fallback: false,
    })
}

/// Correlation matrix of the 2J standardized one-sided statistics, ordered
/// `(V_1, …, V_J, W_1, …, W_J)`.
#[derive(Debug, Clone)]
pub struct CalibrationCov {
    sigma: DMatrix<f64>,
}

impl CalibrationCov {
    pub fn dim(&self) -> usize {
        self.sigma.nrows()
    }

    pub fn entry(&self, a: usize, b: usize) -> f64 {
        self.sigma[(a, b)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn min_eigenvalue(&self) -> f64 {
        SymmetricEigen::new(self.sigma.clone()).eigenvalues.amin()
    }
}

fn cov_from_directions(dirs: &DirectionSet, design: &Design, delta: f64) -> Result<CalibrationCov> {
    let j_count = dirs.lower.len();
    let p = 2 * j_count;
    let n = design.len();
    let weights: Vec<f64> = design.sigma().iter().map(|s| 1.0 / (s * s)).collect();

    // Hinge-weight vector and sign per statistic.
    let mut dvecs: Vec<Vec<f64>> = Vec::with_capacity(p);
    let mut signs: Vec<f64> = Vec::with_capacity(p);
    for prob in dirs.lower.iter() {
        dvecs.push(prob.solve(delta)?.d);
        signs.push(1.0);
    }
    for prob in dirs.upper.iter() {
        dvecs.push(prob.solve(delta)?.d);
        signs.push(-1.0);
    }

    let mut sigma = DMatrix::zeros(p, p);
    for a in 0..p {
        for b in a..p {
            let mut s = CompensatedSum::new();
            for i in 0..n {
                s.add(dvecs[a][i] * dvecs[b][i] * weights[i]);
            }
            let v = signs[a] * signs[b] * s.value() / (delta * delta);
            sigma[(a, b)] = v;
            sigma[(b, a)] = v;
        }
    }
    Ok(CalibrationCov { sigma })
}

/// Covariance of the 2J one-sided statistics at common one-sided level
/// `tau` (so at modulus budget `δ = z_{1−τ}`).
pub fn calibration_cov(design: &Design, ladder: &ClassLadder, tau: f64) -> Result<CalibrationCov> {
    if !(tau > 0.0 && tau < 0.5) {
        return Err(Error::InvalidInput(format!("tau = {tau} must lie in (0, 0.5)")));
    }
    let dirs = DirectionSet::new(design, ladder)?;
    cov_from_directions(&dirs, design, normal_quantile(1.0 - tau))
}

/// Outcome of the τ* search.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TauStar {
    pub tau: f64,
    /// The naive Bonferroni level `α/(2J)` for comparison.
    pub naive: f64,
    /// True when the covariance failed PSD repair and the naive level was
    /// used instead.
    pub fallback: bool,
}

/// Lower-triangular factor `L` with `LLᵀ = A` for a positive semidefinite
/// matrix; rank-deficient columns are zeroed rather than failing.
fn psd_cholesky(a: &DMatrix<f64>) -> DMatrix<f64> {
    let p = a.nrows();
    let tol = 1e-12 * a.diagonal().amax().max(1.0);
    let mut l = DMatrix::zeros(p, p);
    for j in 0..p {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d <= tol {
            continue;
        }
        let dj = d.sqrt();
        l[(j, j)] = dj;
        for i in (j + 1)..p {
            let mut v = a[(i, j)];
            for k in 0..j {
                v -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = v / dj;
        }
    }
    l
}

/// Clip eigenvalues below zero and renormalize to unit diagonal.
fn repair_psd(sigma: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(sigma.clone());
    let p = sigma.nrows();
    let mut rebuilt: DMatrix<f64> = DMatrix::zeros(p, p);
    for k in 0..p {
        let lam = eig.eigenvalues[k].max(0.0);
        if lam > 0.0 {
            let v = eig.eigenvectors.column(k);
            for i in 0..p {
                for j in 0..p {
                    rebuilt[(i, j)] += lam * v[i] * v[j];
                }
            }
        }
    }
    let scale: Vec<f64> =
        (0..p).map(|i| if rebuilt[(i, i)] > 0.0 { rebuilt[(i, i)].sqrt() } else { 1.0 }).collect();
    for i in 0..p {
        for j in 0..p {
            rebuilt[(i, j)] /= scale[i] * scale[j];
        }
    }
    rebuilt
}

// Fall back to the naive level when repair would move the matrix by more
// than this; below it, clip-and-renormalize is considered cosmetic.
const PSD_FALLBACK_EIG: f64 = -1e-6;
const PSD_REPAIR_EIG: f64 = -1e-8;

/// Largest one-sided level `τ ∈ [α/(2J), α]` keeping the Monte Carlo
/// exceedance probability of the max statistic at or below `α`.
///
/// The 2J statistics are those of the naive bounds (budget
/// `δ̲ = z_{1−α/(2J)}`), so their covariance is computed once and the
/// search only moves the threshold `z_{1−τ}` over one correlated sample of
/// draws. Feasibility is then exactly monotone in `τ` and the bisection
/// resolves it to 1e-4. Deterministic given `seed`; the naive endpoint is
/// feasible by the union bound and is the fallback whenever the covariance
/// cannot be repaired.
pub fn tau_star(
    design: &Design,
    ladder: &ClassLadder,
    alpha: f64,
    mc_draws: usize,
    seed: u64,
) -> Result<TauStar> {
    validate_alpha(alpha)?;
    if mc_draws < 10_000 {
        return Err(Error::InvalidInput(format!(
            "mc_draws = {mc_draws} too small for calibration (need >= 10000)"
        )));
    }
    let naive = alpha / (2.0 * ladder.len() as f64);
    let dirs = DirectionSet::new(design, ladder)?;
    let cov = cov_from_directions(&dirs, design, normal_quantile(1.0 - naive))?;
    let min_eig = cov.min_eigenvalue();
    if min_eig < PSD_FALLBACK_EIG {
        log::warn!("covariance repair failed (min eig {min_eig:.2e}); using naive level {naive}");
        return Ok(TauStar { tau: naive, naive, fallback: true });
    }
    let sigma = if min_eig < PSD_REPAIR_EIG { repair_psd(&cov.sigma) } else { cov.sigma };
    let l = psd_cholesky(&sigma);
    let p = sigma.nrows();

    // One correlated sample of the max statistic, reused for every tau.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut maxima = Vec::with_capacity(mc_draws);
    let mut z = vec![0.0f64; p];
    for _ in 0..mc_draws {
        for v in z.iter_mut() {
            *v = rng.sample::<f64, _>(rand_distr::StandardNormal);
        }
        let mut max = f64::NEG_INFINITY;
        for i in 0..p {
            let mut v = 0.0;
            for k in 0..=i {
                v += l[(i, k)] * z[k];
            }
            if v > max {
                max = v;
            }
        }
        maxima.push(max);
    }
    let feasible = |tau: f64| -> bool {
        let threshold = normal_quantile(1.0 - tau);
        let count = maxima.iter().filter(|&&m| m > threshold).count();
        count as f64 <= alpha * mc_draws as f64
    };

    if feasible(alpha) {
        return Ok(TauStar { tau: alpha, naive, fallback: false });
    }
    let mut lo = naive;
    let mut hi = alpha;
    while hi - lo > 1e-4 {
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(TauStar { tau: lo, naive, fallback: false })
}

/// Adaptive CI with the per-bound critical value calibrated by
/// [`tau_star`], keeping the naive modulus budget.
///
/// Since `τ* ≥ α/(2J)` and only the quantile changes, the result is always
/// contained in the naive Bonferroni interval on the same data.
pub fn calibrated_ci(
    design: &Design,
    y: &[f64],
    ladder: &ClassLadder,
    alpha: f64,
    mc_draws: usize,
    seed: u64,
) -> Result<AdaptiveCI> {
    let ts = tau_star(design, ladder, alpha, mc_draws, seed)?;
    let dirs = DirectionSet::new(design, ladder)?;
    let budget = normal_quantile(1.0 - ts.naive);
    let (lower, upper, per_level, skipped_levels) = intersect(&dirs, design, y, ts.tau, budget)?;
    Ok(AdaptiveCI {
        lower,
        upper,
        per_level,
        skipped_levels,
        tau: ts.tau,
        method: CiMethod::Calibrated,
        seed: Some(seed),
        mc_draws: Some(mc_draws),
        tau_fallback: ts.fallback,
    })
}

/// Adaptive one-sided bound with per-level values.
#[derive(Debug, Clone, Serialize)]
pub struct AdaptiveOneSided {
    pub value: f64,
    pub per_level: Vec<OneSidedBound>,
    pub skipped_levels: Vec<(usize, String)>,
}

fn adaptive_onesided(
    design: &Design,
    y: &[f64],
    ladder: &ClassLadder,
    alpha: f64,
    lower_side: bool,
) -> Result<AdaptiveOneSided> {
    validate_alpha(alpha)?;
    let dirs = DirectionSet::new(design, ladder)?;
    let level_alpha = alpha / ladder.len() as f64;
    let delta = normal_quantile(1.0 - level_alpha);
    let mut per_level = Vec::new();
    let mut skipped = Vec::new();
    let mut best = if lower_side { f64::NEG_INFINITY } else { f64::INFINITY };
    let mut last_err = String::new();
    for j in 0..ladder.len() {
        let probs = if lower_side { &dirs.lower[j] } else { &dirs.upper[j] };
        let side = if lower_side { crate::ci_onesided::Side::Lower } else { crate::ci_onesided::Side::Upper };
        let result = probs.solve(delta).and_then(|sol| {
            crate::ci_onesided::bound_from_solution(&sol, design, y, side, level_alpha, j)
        });
        match result {
            Ok(b) => {
                best = if lower_side { best.max(b.value) } else { best.min(b.value) };
                per_level.push(b);
            }
            Err(e) => {
                log::warn!("one-sided level {} skipped: {e}", j + 1);
                last_err = e.to_string();
                skipped.push((j, last_err.clone()));
            }
        }
    }
    if per_level.is_empty() {
        return Err(Error::AllLevelsFailed { levels: ladder.len(), last_error: last_err });
    }
    Ok(AdaptiveOneSided { value: best, per_level, skipped_levels: skipped })
}

/// Adaptive lower one-sided CI: `max_j ĉ^{ℓ,j}_{α/J}`.
pub fn adaptive_onesided_lower(
    design: &Design,
    y: &[f64],
    ladder: &ClassLadder,
    alpha: f64,
) -> Result<AdaptiveOneSided> {
    adaptive_onesided(design, y, ladder, alpha, true)
}

/// Adaptive upper one-sided CI: `min_j ĉ^{u,j}_{α/J}`.
pub fn adaptive_onesided_upper(
    design: &Design,
    y: &[f64],
    ladder: &ClassLadder,
    alpha: f64,
) -> Result<AdaptiveOneSided> {
    adaptive_onesided(design, y, ladder, alpha, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::normal_quantile;
    use crate::function_class::HolderClass;
    use crate::geometry::{IndexSet, MonotoneNorm};

    fn ladder(gammas: &[f64]) -> ClassLadder {
        let norm = MonotoneNorm::euclidean(2);
        let v = IndexSet::full(2);
        ClassLadder::new(
            gammas
                .iter()
                .map(|&g| HolderClass::new(g, 1.0, v.clone(), norm.clone()).unwrap())
                .collect(),
        )
        .unwrap()
    }

    fn small_design(n: usize, seed: u64) -> Design {
        use rand::prelude::*;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let half = 0.5 / 2f64.sqrt();
        Design::with_unit_sigma(
            (0..n).map(|_| (0..2).map(|_| rng.gen_range(-half..half)).collect()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn adaptivity_constant_reference_values() {
        assert!((adaptivity_constant(0.05, 50) - 3.357742037554956).abs() < 1e-12);
        assert!((adaptivity_constant(0.05, 1000) - 4.138470924070213).abs() < 1e-12);
        assert_eq!(adaptivity_constant(0.17, 1), 2.0);
    }

    #[test]
    fn single_level_reduces_to_two_sided_interval() {
        let lad = ladder(&[0.5]);
        let d = Design::with_unit_sigma(vec![vec![0.0, 0.0]]).unwrap();
        let ci = bonferroni_ci(&d, &[1.0], &lad, 0.05).unwrap();
        let z = normal_quantile(1.0 - 0.025);
        assert!((ci.lower - (1.0 - z)).abs() < 1e-12);
        assert!((ci.upper - (1.0 + z)).abs() < 1e-12);
        assert!((ci.tau - 0.025).abs() < 1e-15);
    }

    #[test]
    fn duplicate_level_only_changes_the_bonferroni_split() {
        let d = small_design(40, 9);
        let y: Vec<f64> = (0..40).map(|i| (i as f64 * 0.37).sin() * 0.3).collect();
        let two = ladder(&[1.0, 1e-3]);
        let three = ladder(&[1.0, 1.0, 1e-3]);
        let ci2 = bonferroni_ci(&d, &y, &two, 0.05).unwrap();
        let ci3 = bonferroni_ci(&d, &y, &three, 0.05).unwrap();
        // The 3-level CI uses stricter per-bound levels, so it cannot be
        // narrower than the 2-level CI recomputed at that stricter level.
        let dirs = DirectionSet::new(&d, &two).unwrap();
        let tau = 0.05 / 6.0;
        let (lo, hi, _, _) = intersect(&dirs, &d, &y, tau, normal_quantile(1.0 - tau)).unwrap();
        assert!(ci3.lower <= lo + 1e-12 && ci3.upper >= hi - 1e-12);
        assert!(ci3.length() >= ci2.length() - 1e-12);
    }

    #[test]
    fn covariance_diagonal_is_unit_and_psd() {
        let d = small_design(60, 4);
        let lad = ladder(&[1.0, 1e-3]);
        let cov = calibration_cov(&d, &lad, 0.0125).unwrap();
        for i in 0..cov.dim() {
            assert!((cov.entry(i, i) - 1.0).abs() < 1e-8, "diag {i} = {}", cov.entry(i, i));
        }
        assert!(cov.min_eigenvalue() >= -1e-8);
        // Self level: V_J and W_J are perfectly negatively correlated.
        assert!((cov.entry(1, 3) + 1.0).abs() < 1e-9);
    }

    #[test]
    fn disjoint_active_sets_give_zero_cross_covariance() {
        // With the two-level ladder the lower direction for level 1 only
        // activates the negative-orthant point at small delta, the upper
        // direction only the positive one, so Cov(V_1, W_1) vanishes.
        let d = Design::with_unit_sigma(vec![vec![0.3, 0.3], vec![-0.3, -0.3]]).unwrap();
        let lad = ladder(&[1.0, 1e-3]);
        let cov = calibration_cov(&d, &lad, 0.4).unwrap();
        assert!(cov.entry(0, 2).abs() < 1e-12, "cross = {}", cov.entry(0, 2));
    }

    #[test]
    fn tau_star_bounds_and_identical_levels() {
        let d = small_design(50, 21);
        let lad = ladder(&[1.0, 1.0, 1.0]);
        let alpha = 0.05;
        let ts = tau_star(&d, &lad, alpha, 20_000, 7).unwrap();
        assert!(ts.tau >= alpha / 6.0 - 1e-15);
        assert!(ts.tau <= alpha + 1e-15);
        // Identical levels: the 2J statistics collapse to (V, -V), so the
        // exceedance is that of |V| and tau* = alpha / 2.
        assert!(
            (ts.tau - alpha / 2.0).abs() < 2.5e-3,
            "tau* = {} vs alpha/2 = {}",
            ts.tau,
            alpha / 2.0
        );
    }

    #[test]
    fn calibrated_is_contained_in_naive() {
        let d = small_design(80, 33);
        let lad = ladder(&[1.0, 1e-3]);
        let y: Vec<f64> = (0..80).map(|i| (i as f64 * 0.71).cos() * 0.5).collect();
        let naive = bonferroni_ci(&d, &y, &lad, 0.05).unwrap();
        let cal = calibrated_ci(&d, &y, &lad, 0.05, 20_000, 5).unwrap();
        assert!(cal.tau >= naive.tau - 1e-15);
        assert!(cal.lower >= naive.lower - 1e-10);
        assert!(cal.upper <= naive.upper + 1e-10);
        assert_eq!(cal.method, CiMethod::Calibrated);
        assert_eq!(cal.seed, Some(5));
    }

    #[test]
    fn calibrated_bounds_shift_inward_by_the_quantile_gap() {
        // Each calibrated bound must equal its naive counterpart moved
        // inward by (z_naive − z_tau*)·ω′ of that bound.
        let d = small_design(120, 77);
        let lad = ladder(&[1.0, 1e-3]);
        let y: Vec<f64> = (0..120).map(|i| (i as f64 * 0.13).sin()).collect();
        let naive = bonferroni_ci(&d, &y, &lad, 0.05).unwrap();
        let cal = calibrated_ci(&d, &y, &lad, 0.05, 20_000, 3).unwrap();
        let gap = normal_quantile(1.0 - naive.tau) - normal_quantile(1.0 - cal.tau);
        assert!(gap >= 0.0);
        for (nb, cb) in naive.per_level.iter().zip(&cal.per_level) {
            assert!((cb.lower.value - (nb.lower.value + gap * nb.lower.sd)).abs() < 1e-10);
            assert!((cb.upper.value - (nb.upper.value - gap * nb.upper.sd)).abs() < 1e-10);
        }
    }

    #[test]
    fn covariance_is_stable_across_tau_on_large_designs() {
        // Numerical image of the asymptotic tau-invariance of the
        // statistics' correlation matrix. The gap decays like a fractional
        // power of n (about 0.05 at n = 5e3, 0.04 at 1e4, 0.03 at 2e4).
        let d = small_design(10_000, 13);
        let lad = ladder(&[1.0, 1e-3]);
        let a = calibration_cov(&d, &lad, 0.05 / 4.0).unwrap();
        let b = calibration_cov(&d, &lad, 0.05).unwrap();
        let mut worst = 0.0f64;
        for i in 0..a.dim() {
            for j in 0..a.dim() {
                worst = worst.max((a.entry(i, j) - b.entry(i, j)).abs());
            }
        }
        assert!(worst <= 0.05, "max |Δcov| = {worst}");
    }

    #[test]
    fn tau_star_is_deterministic_in_seed() {
        let d = small_design(30, 2);
        let lad = ladder(&[1.0, 1e-3]);
        let a = tau_star(&d, &lad, 0.05, 10_000, 42).unwrap();
        let b = tau_star(&d, &lad, 0.05, 10_000, 42).unwrap();
        assert_eq!(a.tau.to_bits(), b.tau.to_bits());
    }

    #[test]
    fn adaptive_onesided_is_max_of_levels() {
        let d = small_design(50, 8);
        let lad = ladder(&[1.0, 1e-3]);
        let y = vec![0.1; 50];
        let got = adaptive_onesided_lower(&d, &y, &lad, 0.05).unwrap();
        assert_eq!(got.per_level.len(), 2);
        let max = got.per_level.iter().map(|b| b.value).fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(got.value, max);
        for b in &got.per_level {
            assert!((b.alpha - 0.025).abs() < 1e-15);
        }

        let single = ladder(&[1e-3]);
        let one = adaptive_onesided_lower(&d, &y, &single, 0.05).unwrap();
        let direct = crate::ci_onesided::lower_bound(&d, &y, &single, 0, 0.05, 0.5).unwrap();
        assert!((one.value - direct.value).abs() < 1e-12);
    }

    #[test]
    fn psd_cholesky_handles_singular_matrices() {
        // All-ones matrix: PSD of rank one.
        let a = DMatrix::from_element(3, 3, 1.0);
        let l = psd_cholesky(&a);
        let rebuilt = &l * l.transpose();
        for i in 0..3 {
            for j in 0..3 {
                assert!((rebuilt[(i, j)] - a[(i, j)]).abs() < 1e-12);
            }
        }
    }
}
