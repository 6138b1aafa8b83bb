//! Optimal one-sided confidence bounds built from ordered modulus solutions.
//!
//! For ladder level `j` the lower bound directs power to `ℱ_j` while keeping
//! coverage over `ℱ_J`. With `δ = z_{1−α} + z_β` and the modulus solution
//! for `ω(δ, ℱ_J, ℱ_j)`, the estimator is the hinge-weighted average
//!
//! ```text
//! L̂ = (f₁*(0) + f₂*(0))/2
//!     + Σᵢ (D(xᵢ)/σᵢ²)(yᵢ − (f₁*(xᵢ) + f₂*(xᵢ))/2) / Σᵢ D(xᵢ)/σᵢ²
//! ```
//!
//! and the bound subtracts the worst-case bias plus a scaled normal
//! quantile: `ĉ^ℓ = L̂ − ½ω(δ) + ½δω′(δ) − z_{1−α}ω′(δ)`. The upper bound
//! mirrors this with the swapped modulus direction. At `β = 1/2` the
//! correction collapses to `½(ω + δ²/ΣD/σ²)`.

use serde::Serialize;

use crate::dist::normal_quantile;
use crate::error::{Error, Result};
use crate::function_class::ClassLadder;
use crate::modulus::{Design, ModulusProblem, ModulusSolution, OrderedPair};
use crate::numeric::CompensatedSum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Lower,
    Upper,
}

/// One one-sided bound together with its diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct OneSidedBound {
    /// The bound value `ĉ`.
    pub value: f64,
    pub side: Side,
    /// One-sided level this bound was computed at.
    pub alpha: f64,
    /// Modulus budget `δ = z_{1−α} + z_β`.
    pub delta: f64,
    /// Ladder level the bound directs power to (0-based).
    pub level_index: usize,
    /// The affine estimator value `L̂`.
    pub estimator: f64,
    /// Gaussian sd of the estimator, `ω′(δ)`.
    pub sd: f64,
    /// Worst-case bias half-width `(ω − δω′)/2`.
    pub max_bias_halfwidth: f64,
    /// Number of design points with positive hinge weight.
    pub active_points: usize,
}

/// Hinge weights `D(xᵢ)` for a solved modulus problem, recomputed from the
/// closed-form hinge. Errors if no point activates.
pub fn hinge_weights(solution: &ModulusSolution, design: &Design) -> Result<Vec<f64>> {
    let prob = ModulusProblem::new(&solution.pair, design)?;
    let sol = prob.solution_at_separation(solution.b, solution.delta);
    if sol.d.iter().all(|&d| d <= 0.0) {
        return Err(Error::AllZeroWeights { delta: solution.delta });
    }
    Ok(sol.d)
}

/// The affine estimator `L̂` for a modulus solution applied to data `y`.
///
/// Affine in `y` with weights proportional to `D(xᵢ)/σᵢ²`; exposed so
/// correlation checks can rerun it on fresh noise draws without re-solving
/// the modulus.
pub fn affine_estimator(solution: &ModulusSolution, design: &Design, y: &[f64]) -> Result<f64> {
    if y.len() != design.len() {
        return Err(Error::DimensionMismatch { expected: design.len(), got: y.len() });
    }
    if solution.sum_d_over_sigma2 <= 0.0 {
        return Err(Error::AllZeroWeights { delta: solution.delta });
    }
    let mut acc = CompensatedSum::new();
    for i in 0..design.len() {
        let d = solution.d[i];
        if d > 0.0 {
            let s = design.sigma()[i];
            let mid = 0.5 * (solution.f1_vals[i] + solution.f2_vals[i]);
            acc.add(d / (s * s) * (y[i] - mid));
        }
    }
    // f1*(0) = 0 and f2*(0) = b by construction.
    Ok(0.5 * solution.b + acc.value() / solution.sum_d_over_sigma2)
}

pub(crate) fn bound_from_solution(
    solution: &ModulusSolution,
    design: &Design,
    y: &[f64],
    side: Side,
    alpha: f64,
    level_index: usize,
) -> Result<OneSidedBound> {
    let estimator = affine_estimator(solution, design, y)?;
    let omega = solution.b;
    let omega_prime = solution.omega_prime;
    let delta = solution.delta;
    let z = normal_quantile(1.0 - alpha);
    let value = match side {
        Side::Lower => estimator - 0.5 * omega + 0.5 * delta * omega_prime - z * omega_prime,
        Side::Upper => estimator + 0.5 * omega - 0.5 * delta * omega_prime + z * omega_prime,
    };
    Ok(OneSidedBound {
        value,
        side,
        alpha,
        delta,
        level_index,
        estimator,
        sd: omega_prime,
        max_bias_halfwidth: 0.5 * (omega - delta * omega_prime),
        active_points: solution.active_points(),
    })
}

fn check_inputs(design: &Design, y: &[f64], ladder: &ClassLadder, j: usize, alpha: f64, beta: f64) -> Result<()> {
    if y.len() != design.len() {
        return Err(Error::DimensionMismatch { expected: design.len(), got: y.len() });
    }
    if j >= ladder.len() {
        return Err(Error::InvalidInput(format!(
            "level index {j} out of range for ladder of size {}",
            ladder.len()
        )));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidInput(format!("alpha = {alpha} must lie in (0, 1)")));
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::InvalidInput(format!("beta = {beta} must lie in (0, 1)")));
    }
    Ok(())
}

/// Optimal lower one-sided bound for ladder level `j` at one-sided level
/// `alpha`; the adaptive pipeline uses `beta = 1/2`.
pub fn lower_bound(
    design: &Design,
    y: &[f64],
    ladder: &ClassLadder,
    j: usize,
    alpha: f64,
    beta: f64,
) -> Result<OneSidedBound> {
    check_inputs(design, y, ladder, j, alpha, beta)?;
    let delta = normal_quantile(1.0 - alpha) + normal_quantile(beta);
    let pair = OrderedPair::new(ladder.largest().clone(), ladder.level(j).clone())?;
    let solution = ModulusProblem::new(&pair, design)?.solve(delta)?;
    bound_from_solution(&solution, design, y, Side::Lower, alpha, j)
}

/// Optimal upper one-sided bound, mirror of [`lower_bound`] with the
/// modulus direction swapped.
pub fn upper_bound(
    design: &Design,
    y: &[f64],
    ladder: &ClassLadder,
    j: usize,
    alpha: f64,
    beta: f64,
) -> Result<OneSidedBound> {
    check_inputs(design, y, ladder, j, alpha, beta)?;
    let delta = normal_quantile(1.0 - alpha) + normal_quantile(beta);
    let pair = OrderedPair::new(ladder.level(j).clone(), ladder.largest().clone())?;
    let solution = ModulusProblem::new(&pair, design)?.solve(delta)?;
    bound_from_solution(&solution, design, y, Side::Upper, alpha, j)
}

/// Both bounds for one level from pre-built modulus problems; used by the
/// adaptive intersections so repeated levels share the norm precomputation.
///
/// `budget_delta` is the modulus budget of the affine estimator; `alpha`
/// sets the normal quantile. They coincide (`delta = z_{1−α}`) for the
/// naive interval; the calibrated interval keeps the naive budget and only
/// relaxes the quantile, which makes it nest inside the naive one.
pub(crate) fn bounds_from_problems(
    lower_prob: &ModulusProblem,
    upper_prob: &ModulusProblem,
    design: &Design,
    y: &[f64],
    alpha: f64,
    budget_delta: f64,
    level_index: usize,
) -> Result<(OneSidedBound, OneSidedBound)> {
    let lo_sol = lower_prob.solve(budget_delta)?;
    let up_sol = upper_prob.solve(budget_delta)?;
    let lo = bound_from_solution(&lo_sol, design, y, Side::Lower, alpha, level_index)?;
    let up = bound_from_solution(&up_sol, design, y, Side::Upper, alpha, level_index)?;
    Ok((lo, up))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::function_class::HolderClass;
    use crate::geometry::{IndexSet, MonotoneNorm};
    use crate::modulus::forward_modulus;

    fn ladder2() -> ClassLadder {
        let norm = MonotoneNorm::euclidean(2);
        let v = IndexSet::full(2);
        ClassLadder::new(vec![
            HolderClass::new(1.0, 1.0, v.clone(), norm.clone()).unwrap(),
            HolderClass::new(1e-3, 1.0, v, norm).unwrap(),
        ])
        .unwrap()
    }

    fn design3() -> Design {
        Design::with_unit_sigma(vec![vec![0.2, 0.3], vec![-0.3, -0.1], vec![0.1, -0.2]]).unwrap()
    }

    #[test]
    fn single_point_reduces_to_classical_gaussian_bounds() {
        let ladder = ladder2();
        let d = Design::with_unit_sigma(vec![vec![0.0, 0.0]]).unwrap();
        let y = [0.37];
        let z95 = normal_quantile(0.95);
        for j in 0..2 {
            let lo = lower_bound(&d, &y, &ladder, j, 0.05, 0.5).unwrap();
            let up = upper_bound(&d, &y, &ladder, j, 0.05, 0.5).unwrap();
            assert!((lo.value - (0.37 - z95)).abs() < 1e-12, "level {j}: {}", lo.value);
            assert!((up.value - (0.37 + z95)).abs() < 1e-12);
            assert!((lo.estimator - 0.37).abs() < 1e-12);
            assert!((lo.sd - 1.0).abs() < 1e-12);
            assert!(lo.max_bias_halfwidth.abs() < 1e-12);
        }
    }

    #[test]
    fn hinge_weights_match_extremal_gap() {
        let ladder = ladder2();
        let d = design3();
        let pair = OrderedPair::new(ladder.largest().clone(), ladder.level(0).clone()).unwrap();
        let sol = forward_modulus(&pair, &d, 1.3).unwrap();
        let w = hinge_weights(&sol, &d).unwrap();
        for i in 0..d.len() {
            assert!((w[i] - (sol.f2_vals[i] - sol.f1_vals[i])).abs() < 1e-12);
            assert!(w[i] >= 0.0);
        }
    }

    #[test]
    fn estimator_matches_direct_hinge_formula() {
        // Independent route at unit sigma: the hinge-weighted average of y
        // plus the fixed centering terms, written out with the class norms
        // rather than the stored extremal values.
        let ladder = ladder2();
        let d = design3();
        let y = [0.6, -0.4, 0.2];
        let (small, big) = (ladder.level(0), ladder.largest());
        let delta = 1.4;

        // Lower direction: omega(delta, F_J, F_j).
        let pair = OrderedPair::new(big.clone(), small.clone()).unwrap();
        let sol = forward_modulus(&pair, &d, delta).unwrap();
        let omega = sol.b;
        let mut sd = 0.0;
        let mut sdy = 0.0;
        let mut sfix = 0.0;
        for i in 0..d.len() {
            let x = d.point(i);
            let di = (omega - small.rise_minus(x) - big.rise_plus(x)).max(0.0);
            sd += di;
            sdy += di * y[i];
            sfix += di * (omega - small.rise_minus(x) + big.rise_plus(x));
        }
        let direct = sdy / sd + 0.5 * omega - sfix / (2.0 * sd);
        let got = affine_estimator(&sol, &d, &y).unwrap();
        assert!((got - direct).abs() < 1e-12, "lower: {got} vs {direct}");

        // Upper direction: omega(delta, F_j, F_J), projections swapped.
        let pair = OrderedPair::new(small.clone(), big.clone()).unwrap();
        let sol = forward_modulus(&pair, &d, delta).unwrap();
        let omega = sol.b;
        let (mut sd, mut sdy, mut sfix) = (0.0, 0.0, 0.0);
        for i in 0..d.len() {
            let x = d.point(i);
            let di = (omega - big.rise_minus(x) - small.rise_plus(x)).max(0.0);
            sd += di;
            sdy += di * y[i];
            sfix += di * (omega - big.rise_minus(x) + small.rise_plus(x));
        }
        let direct = sdy / sd + 0.5 * omega - sfix / (2.0 * sd);
        let got = affine_estimator(&sol, &d, &y).unwrap();
        assert!((got - direct).abs() < 1e-12, "upper: {got} vs {direct}");
    }

    #[test]
    fn estimator_is_affine_in_y() {
        let ladder = ladder2();
        let d = design3();
        let y0 = [0.1, -0.2, 0.4];
        let noise = [0.5, -0.3, 0.2];
        let pair = OrderedPair::new(ladder.largest().clone(), ladder.level(0).clone()).unwrap();
        let sol = forward_modulus(&pair, &d, 1.1).unwrap();
        let base = affine_estimator(&sol, &d, &y0).unwrap();
        let y1: Vec<f64> = y0.iter().zip(&noise).map(|(a, b)| a + b).collect();
        let y2: Vec<f64> = y0.iter().zip(&noise).map(|(a, b)| a + 2.0 * b).collect();
        let e1 = affine_estimator(&sol, &d, &y1).unwrap();
        let e2 = affine_estimator(&sol, &d, &y2).unwrap();
        assert!((e2 - base - 2.0 * (e1 - base)).abs() < 1e-12);
    }

    #[test]
    fn noise_free_extremal_truth_is_covered_from_below() {
        let ladder = ladder2();
        let d = design3();
        let pair = OrderedPair::new(ladder.largest().clone(), ladder.level(0).clone()).unwrap();
        let sol = forward_modulus(&pair, &d, 2.0).unwrap();
        // Truth = the upper extremal function g*_j, with g*(0) = omega.
        let y: Vec<f64> = sol.f2_vals.clone();
        let truth_at_origin = sol.b;
        let lo = lower_bound(&d, &y, &ladder, 0, 0.05, 0.5).unwrap();
        assert!(lo.value <= truth_at_origin + 1e-12);
        // And the lower extremal function f*_J with value 0 at the origin.
        let y: Vec<f64> = sol.f1_vals.clone();
        let lo = lower_bound(&d, &y, &ladder, 0, 0.05, 0.5).unwrap();
        assert!(lo.value <= 1e-12);
    }

    #[test]
    fn upper_is_reflected_lower() {
        let ladder = ladder2();
        let d = design3();
        let y = [0.4, -0.1, 0.25];
        let up = upper_bound(&d, &y, &ladder, 0, 0.07, 0.5).unwrap();

        let reflected = Design::with_unit_sigma(
            (0..d.len()).map(|i| d.point(i).iter().map(|v| -v).collect()).collect(),
        )
        .unwrap();
        let neg_y: Vec<f64> = y.iter().map(|v| -v).collect();
        let lo = lower_bound(&reflected, &neg_y, &ladder, 0, 0.07, 0.5).unwrap();
        assert!(
            (up.value + lo.value).abs() < 1e-10,
            "upper {} vs reflected lower {}",
            up.value,
            lo.value
        );
    }

    #[test]
    fn input_validation() {
        let ladder = ladder2();
        let d = design3();
        let y = [0.0, 0.0, 0.0];
        assert!(lower_bound(&d, &y[..2], &ladder, 0, 0.05, 0.5).is_err());
        assert!(lower_bound(&d, &y, &ladder, 5, 0.05, 0.5).is_err());
        assert!(lower_bound(&d, &y, &ladder, 0, 0.0, 0.5).is_err());
        assert!(lower_bound(&d, &y, &ladder, 0, 0.05, 1.0).is_err());
    }
}
