//! Fixed-length minimax benchmark interval built from the self-modulus.
//!
//! For a single class `ℱ` the optimal affine fixed-length CI at budget `δ`
//! has sd `ω′(δ)`, worst-case bias `(ω(δ) − δω′(δ))/2`, and half-length
//! `ω′(δ) · cv_α(bias/sd)` where `cv_α(t)` is the `1−α` quantile of
//! `|N(t, 1)|`. The budget is chosen by a one-dimensional search; the
//! half-length never depends on the data, only the center does.

use serde::Serialize;

use crate::ci_onesided::affine_estimator;
use crate::dist::{normal_cdf, normal_pdf, normal_quantile};
use crate::error::{Error, Result};
use crate::function_class::{ClassLadder, HolderClass};
use crate::modulus::{Design, ModulusProblem, OrderedPair};

/// Fixed-length minimax CI `center ± half_length`.
#[derive(Debug, Clone, Serialize)]
pub struct FixedLengthCI {
    pub center: f64,
    pub half_length: f64,
    /// The budget `δ` minimizing the half-length.
    pub delta_opt: f64,
    /// Ladder level this benchmark targets, when built from a ladder.
    pub class_index: Option<usize>,
}

impl FixedLengthCI {
    pub fn lower(&self) -> f64 {
        self.center - self.half_length
    }

    pub fn upper(&self) -> f64 {
        self.center + self.half_length
    }

    pub fn length(&self) -> f64 {
        2.0 * self.half_length
    }

    pub fn covers(&self, value: f64) -> bool {
        self.lower() <= value && value <= self.upper()
    }
}

/// `1−α` quantile of `|N(t, 1)|`, monotone increasing in `t ≥ 0`.
///
/// Solved by a safeguarded Newton iteration on
/// `Φ(c−t) − Φ(−c−t) = 1−α`; for large `t` it approaches `t + z_{1−α}`.
pub fn cv_biased_normal(t: f64, alpha: f64) -> f64 {
    assert!(t >= 0.0, "bias ratio must be nonnegative");
    assert!(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0,1)");
    let target = 1.0 - alpha;
    let mut lo = 0.0f64;
    let mut hi = t + normal_quantile(1.0 - alpha / 2.0);
    let prob = |c: f64| normal_cdf(c - t) - normal_cdf(-c - t);
    debug_assert!(prob(hi) >= target - 1e-12);
    let mut c = 0.5 * (lo + hi);
    for _ in 0..200 {
        let p = prob(c);
        let err = p - target;
        if err.abs() <= 1e-12 {
            break;
        }
        if err > 0.0 {
            hi = c;
        } else {
            lo = c;
        }
        let slope = normal_pdf(c - t) + normal_pdf(c + t);
        let newton = c - err / slope;
        let next = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if (next - c).abs() <= 1e-14 * c.abs().max(1.0) {
            c = next;
            break;
        }
        c = next;
    }
    c
}

fn half_length_at(prob: &ModulusProblem, delta: f64, alpha: f64) -> Result<f64> {
    let sol = prob.solve(delta)?;
    let sd = sol.omega_prime;
    let bias_ratio = (0.5 * (sol.b / sd - delta)).max(0.0);
    Ok(sd * cv_biased_normal(bias_ratio, alpha))
}

/// Shortest fixed-length CI for `f(0)` honest over a single class.
///
/// The budget search runs a coarse logarithmic pre-scan over
/// `[1e-3, 1e3] · z_{1−α/2}` followed by golden-section refinement, which
/// guards against locally flat stretches of the objective.
pub fn minimax_fixed_ci(
    design: &Design,
    y: &[f64],
    class: &HolderClass,
    alpha: f64,
) -> Result<FixedLengthCI> {
    if y.len() != design.len() {
        return Err(Error::DimensionMismatch { expected: design.len(), got: y.len() });
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidInput(format!("alpha = {alpha} must lie in (0, 1)")));
    }
    let pair = OrderedPair::self_pair(class.clone());
    let prob = ModulusProblem::new(&pair, design)?;

    let z = normal_quantile(1.0 - alpha / 2.0);
    let lo = (1e-3 * z).ln();
    let hi = (1e3 * z).ln();
    let coarse = 64usize;
    let mut best_i = 0;
    let mut best_v = f64::INFINITY;
    for i in 0..coarse {
        let t = lo + (hi - lo) * i as f64 / (coarse - 1) as f64;
        let v = half_length_at(&prob, t.exp(), alpha)?;
        if v < best_v {
            best_v = v;
            best_i = i;
        }
    }
    let step = (hi - lo) / (coarse - 1) as f64;
    let mut a = lo + step * best_i.saturating_sub(1) as f64;
    let mut b = (lo + step * (best_i + 1) as f64).min(hi);

    // Golden-section on log delta.
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - phi * (b - a);
    let mut x2 = a + phi * (b - a);
    let mut f1 = half_length_at(&prob, x1.exp(), alpha)?;
    let mut f2 = half_length_at(&prob, x2.exp(), alpha)?;
    for _ in 0..100 {
        if b - a <= 1e-10 {
            break;
        }
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = half_length_at(&prob, x1.exp(), alpha)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = half_length_at(&prob, x2.exp(), alpha)?;
        }
    }
    let delta_opt = (0.5 * (a + b)).exp();
    let sol = prob.solve(delta_opt)?;
    let half_length = half_length_at(&prob, delta_opt, alpha)?;
    let center = affine_estimator(&sol, design, y)?;
    Ok(FixedLengthCI { center, half_length, delta_opt, class_index: None })
}

/// Minimax benchmark targeting one ladder level.
pub fn minimax_fixed_ci_level(
    design: &Design,
    y: &[f64],
    ladder: &ClassLadder,
    level: usize,
    alpha: f64,
) -> Result<FixedLengthCI> {
    if level >= ladder.len() {
        return Err(Error::InvalidInput(format!(
            "level {level} out of range for ladder of size {}",
            ladder.len()
        )));
    }
    let mut ci = minimax_fixed_ci(design, y, ladder.level(level), alpha)?;
    ci.class_index = Some(level);
    Ok(ci)
}
