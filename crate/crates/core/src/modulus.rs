//! Ordered modulus of continuity between two monotone Hölder classes, in
//! closed form.
//!
//! For an ordered pair `(ℱ_a, ℱ_b)` the modulus `ω(δ, ℱ_a, ℱ_b)` maximizes
//! `f_b(0) − f_a(0)` subject to `Σ((f_b(xᵢ) − f_a(xᵢ))/σᵢ)² ≤ δ²`. Its
//! inverse has the closed form
//!
//! ```text
//! ω⁻¹(b, ℱ_a, ℱ_b) = sqrt( Σᵢ ((b − C_a‖(xᵢ)_{𝒱+}‖^{γ_a}
//!                                 − C_b‖(xᵢ)_{𝒱−}‖^{γ_b})₊ / σᵢ)² )
//! ```
//!
//! and the forward problem reduces to a one-dimensional root find in `b`,
//! which is convex and piecewise smooth. The extremal functions are built
//! from the class envelopes, with the member of the *larger* class clipped
//! against the other so it stays inside its class.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::function_class::HolderClass;
use crate::geometry::{norm_proj_minus, norm_proj_plus};
use crate::numeric::CompensatedSum;

/// Fixed design: evaluation points already translated so the point of
/// interest sits at the origin, plus known per-point noise sds.
#[derive(Debug, Clone)]
pub struct Design {
    k: usize,
    coords: Vec<f64>,
    sigma: Vec<f64>,
}

impl Design {
    pub fn new(points: Vec<Vec<f64>>, sigma: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidInput("design needs at least one point".into()));
        }
        if points.len() != sigma.len() {
            return Err(Error::DimensionMismatch { expected: points.len(), got: sigma.len() });
        }
        let k = points[0].len();
        if k == 0 {
            return Err(Error::InvalidInput("design points must have dimension >= 1".into()));
        }
        let mut coords = Vec::with_capacity(points.len() * k);
        for (i, p) in points.iter().enumerate() {
            if p.len() != k {
                return Err(Error::DimensionMismatch { expected: k, got: p.len() });
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!("non-finite coordinate at point {i}")));
            }
            coords.extend_from_slice(p);
        }
        for (i, &s) in sigma.iter().enumerate() {
            if !(s > 0.0) || !s.is_finite() {
                return Err(Error::InvalidInput(format!("sigma[{i}] = {s} must be positive")));
            }
        }
        Ok(Self { k, coords, sigma })
    }

    /// Homoskedastic convenience constructor.
    pub fn with_unit_sigma(points: Vec<Vec<f64>>) -> Result<Self> {
        let n = points.len();
        Self::new(points, vec![1.0; n])
    }

    pub fn len(&self) -> usize {
        self.sigma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.k
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.k..(i + 1) * self.k]
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }
}

/// Which class of the ordered pair contains the other.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PairNesting {
    /// `ℱ_from ⊆ ℱ_to`; the upper extremal function is clipped.
    FromInTo,
    /// `ℱ_to ⊆ ℱ_from`; the lower extremal function is clipped.
    ToInFrom,
    /// Identical parameters (self-modulus).
    Equal,
}

/// Ordered pair `(ℱ_from, ℱ_to)` for `ω(δ, ℱ_from, ℱ_to)`; the `to` member
/// is the one whose value at the origin is pushed up.
#[derive(Debug, Clone)]
pub struct OrderedPair {
    from: HolderClass,
    to: HolderClass,
    nesting: PairNesting,
}

impl OrderedPair {
    pub fn new(from: HolderClass, to: HolderClass) -> Result<Self> {
        if from.vset() != to.vset() || from.norm() != to.norm() {
            return Err(Error::InvalidInput(
                "ordered pair must share norm and monotone index set".into(),
            ));
        }
        let from_in_to = from.gamma() >= to.gamma() && from.constant() <= to.constant();
        let to_in_from = to.gamma() >= from.gamma() && to.constant() <= from.constant();
        let nesting = match (from_in_to, to_in_from) {
            (true, true) => PairNesting::Equal,
            (true, false) => PairNesting::FromInTo,
            (false, true) => PairNesting::ToInFrom,
            (false, false) => {
                return Err(Error::InvalidInput(
                    "classes are not nested in either direction (need gamma/C ladder order)"
                        .into(),
                ))
            }
        };
        Ok(Self { from, to, nesting })
    }

    /// Self-modulus pair `(ℱ, ℱ)`.
    pub fn self_pair(class: HolderClass) -> Self {
        Self { from: class.clone(), to: class, nesting: PairNesting::Equal }
    }

    pub fn from_class(&self) -> &HolderClass {
        &self.from
    }

    pub fn to_class(&self) -> &HolderClass {
        &self.to
    }

    pub fn nesting(&self) -> PairNesting {
        self.nesting
    }

    /// The same pair with the roles swapped.
    pub fn swapped(&self) -> Self {
        Self {
            from: self.to.clone(),
            to: self.from.clone(),
            nesting: match self.nesting {
                PairNesting::FromInTo => PairNesting::ToInFrom,
                PairNesting::ToInFrom => PairNesting::FromInTo,
                PairNesting::Equal => PairNesting::Equal,
            },
        }
    }
}

/// Solution of one forward modulus problem at budget `delta`.
#[derive(Debug, Clone)]
pub struct ModulusSolution {
    /// Value separation `f_to(0) − f_from(0) = ω(δ)`.
    pub b: f64,
    pub delta: f64,
    /// `ω'(δ) = δ / Σᵢ D(xᵢ)/σᵢ²`.
    pub omega_prime: f64,
    /// Lower extremal function at the design points (`f_from`, 0 at origin).
    pub f1_vals: Vec<f64>,
    /// Upper extremal function at the design points (`f_to`, `b` at origin).
    pub f2_vals: Vec<f64>,
    /// Hinge weights `D(xᵢ) = f2_vals − f1_vals ≥ 0`.
    pub d: Vec<f64>,
    /// `Σᵢ D(xᵢ)/σᵢ²`.
    pub sum_d_over_sigma2: f64,
    pub pair: OrderedPair,
}

impl ModulusSolution {
    /// Number of design points with strictly positive hinge weight.
    pub fn active_points(&self) -> usize {
        self.d.iter().filter(|&&d| d > 0.0).count()
    }

    /// Worst-case bias half-width `(ω − δω')/2` of the associated affine
    /// estimator.
    pub fn max_bias_halfwidth(&self) -> f64 {
        0.5 * (self.b - self.delta * self.omega_prime)
    }
}

/// Precomputed per-design data for one ordered pair, so repeated solves at
/// different budgets only pay for the one-dimensional root find.
#[derive(Debug, Clone)]
pub struct ModulusProblem {
    pair: OrderedPair,
    /// `C_from‖(xᵢ)_{𝒱+}‖^{γ_from}`.
    rise_from: Vec<f64>,
    /// `C_to‖(xᵢ)_{𝒱−}‖^{γ_to}`.
    drop_to: Vec<f64>,
    /// Hinge offsets `aᵢ = rise_from + drop_to`.
    offsets: Vec<f64>,
    /// Inverse noise variances `1/σᵢ²`.
    weights: Vec<f64>,
    b_min: f64,
}

impl ModulusProblem {
    pub fn new(pair: &OrderedPair, design: &Design) -> Result<Self> {
        if pair.from.dim() != design.dim() {
            return Err(Error::DimensionMismatch { expected: pair.from.dim(), got: design.dim() });
        }
        let n = design.len();
        let vset = pair.from.vset();
        let norm = pair.from.norm();
        let mut rise_from = Vec::with_capacity(n);
        let mut drop_to = Vec::with_capacity(n);
        let mut offsets = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        let mut b_min = f64::INFINITY;
        for i in 0..n {
            let x = design.point(i);
            let plus = norm_proj_plus(norm, vset, x);
            let minus = norm_proj_minus(norm, vset, x);
            let r = pair.from.constant() * plus.powf(pair.from.gamma());
            let d = pair.to.constant() * minus.powf(pair.to.gamma());
            let a = r + d;
            b_min = b_min.min(a);
            rise_from.push(r);
            drop_to.push(d);
            offsets.push(a);
            weights.push(1.0 / (design.sigma()[i] * design.sigma()[i]));
        }
        Ok(Self { pair: pair.clone(), rise_from, drop_to, offsets, weights, b_min })
    }

    /// Smallest separation with nonzero cost; `ω(0⁺)` in the limit.
    pub fn b_min(&self) -> f64 {
        self.b_min
    }

    pub fn pair(&self) -> &OrderedPair {
        &self.pair
    }

    /// `ω⁻¹(b)`: closed-form inverse modulus.
    pub fn inverse(&self, b: f64) -> f64 {
        self.cost(b).sqrt()
    }

    /// `Σ wᵢ (b − aᵢ)₊²`, the squared inverse modulus.
    fn cost(&self, b: f64) -> f64 {
        let mut s = CompensatedSum::new();
        for (a, w) in self.offsets.iter().zip(&self.weights) {
            let h = b - a;
            if h > 0.0 {
                s.add(w * h * h);
            }
        }
        s.value()
    }

    /// `d cost / d b = 2 Σ wᵢ (b − aᵢ)₊`.
    fn cost_slope(&self, b: f64) -> f64 {
        let mut s = CompensatedSum::new();
        for (a, w) in self.offsets.iter().zip(&self.weights) {
            let h = b - a;
            if h > 0.0 {
                s.add(w * h);
            }
        }
        2.0 * s.value()
    }

    /// Solves `ω⁻¹(b) = delta` for `b = ω(delta)` and assembles the
    /// extremal functions and hinge weights.
    ///
    /// The cost is convex and increasing past `b_min`, so a Newton iteration
    /// started from an upper bracket descends monotonically to the root;
    /// bisection takes over on any step that misbehaves.
    pub fn solve(&self, delta: f64) -> Result<ModulusSolution> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::InvalidInput(format!("delta = {delta} must be positive")));
        }
        let target = delta * delta;
        let total_w: f64 = self.weights.iter().sum();

        // cost(b) <= total_w (b - b_min)^2, so this starting point is a
        // certified lower bracket.
        let mut lo = self.b_min + delta / total_w.sqrt();
        let mut hi = lo;
        let mut step = delta / total_w.sqrt();
        let mut grew = 0;
        while self.cost(hi) < target {
            step *= 2.0;
            lo = hi;
            hi = self.b_min + step;
            grew += 1;
            if grew > 200 {
                return Err(Error::NoMassAtDelta { delta, b_hi: hi });
            }
        }

        let mut b = hi;
        let mut f = self.cost(b) - target;
        for _ in 0..200 {
            if f.abs() <= 1e-13 * target {
                break;
            }
            let slope = self.cost_slope(b);
            let newton = if slope > 0.0 { b - f / slope } else { f64::NEG_INFINITY };
            let next = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
            if (next - b).abs() <= f64::EPSILON * b.abs() {
                break;
            }
            b = next;
            f = self.cost(b) - target;
            if f > 0.0 {
                hi = b;
            } else {
                lo = b;
            }
        }

        Ok(self.solution_at_separation(b, delta))
    }

    /// Extremal functions and weights for a given separation `b`, with the
    /// stated `delta` recorded on the solution.
    pub(crate) fn solution_at_separation(&self, b: f64, delta: f64) -> ModulusSolution {
        let n = self.offsets.len();
        let mut f1 = Vec::with_capacity(n);
        let mut f2 = Vec::with_capacity(n);
        let mut d = Vec::with_capacity(n);
        let mut sum_dw = CompensatedSum::new();
        for i in 0..n {
            let (v1, v2) = match self.pair.nesting {
                // Upper member lives in the larger class: clip it up to the
                // lower envelope where they would cross.
                PairNesting::FromInTo | PairNesting::Equal => {
                    let v1 = self.rise_from[i];
                    (v1, (b - self.drop_to[i]).max(v1))
                }
                // Lower member lives in the larger class: clip it down.
                PairNesting::ToInFrom => {
                    let v2 = b - self.drop_to[i];
                    (v2.min(self.rise_from[i]), v2)
                }
            };
            let di = (v2 - v1).max(0.0);
            f1.push(v1);
            f2.push(v2);
            d.push(di);
            sum_dw.add(di * self.weights[i]);
        }
        let sum_dw = sum_dw.value();
        let omega_prime = if sum_dw > 0.0 { delta / sum_dw } else { f64::NAN };
        ModulusSolution {
            b,
            delta,
            omega_prime,
            f1_vals: f1,
            f2_vals: f2,
            d,
            sum_d_over_sigma2: sum_dw,
            pair: self.pair.clone(),
        }
    }
}

/// One-shot closed-form inverse modulus `ω⁻¹(b, ℱ_from, ℱ_to)`.
pub fn inverse_modulus(pair: &OrderedPair, design: &Design, b: f64) -> Result<f64> {
    if !(b >= 0.0) {
        return Err(Error::InvalidInput(format!("b = {b} must be nonnegative")));
    }
    Ok(ModulusProblem::new(pair, design)?.inverse(b))
}

/// One-shot forward modulus `ω(delta, ℱ_from, ℱ_to)` with extremal data.
pub fn forward_modulus(pair: &OrderedPair, design: &Design, delta: f64) -> Result<ModulusSolution> {
    ModulusProblem::new(pair, design)?.solve(delta)
}

/// Modulus derivative from a solved problem: `ω'(δ) = δ / Σ D(xᵢ)/σᵢ²`.
pub fn omega_prime(solution: &ModulusSolution, design: &Design) -> Result<f64> {
    if solution.d.len() != design.len() {
        return Err(Error::DimensionMismatch { expected: solution.d.len(), got: design.len() });
    }
    let mut s = CompensatedSum::new();
    for (d, sg) in solution.d.iter().zip(design.sigma()) {
        s.add(d / (sg * sg));
    }
    let sum = s.value();
    if sum <= 0.0 {
        return Err(Error::DegenerateModulus);
    }
    Ok(solution.delta / sum)
}

/// Direction of the one-sided adaptation problem against the pure monotone
/// class (no Hölder bound on the other side).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MonotoneOnlyDirection {
    /// `ω⁻¹(b, Λ₊,𝒱(γ,C), Λ₊,𝒱(0,∞))`: hinges open only on the strictly
    /// positive orthant.
    HolderToMonotone,
    /// `ω⁻¹(b, Λ₊,𝒱(0,∞), Λ₊,𝒱(γ,C))`: strictly negative orthant.
    MonotoneToHolder,
}

/// Inverse modulus against the pure monotone class.
///
/// When `𝒱` is a proper subset of the coordinates the problem degenerates
/// for almost every design and the inverse modulus is identically zero;
/// that case returns `0` rather than erroring.
pub fn inverse_modulus_monotone_only(
    class: &HolderClass,
    design: &Design,
    b: f64,
    direction: MonotoneOnlyDirection,
) -> Result<f64> {
    if !(b >= 0.0) {
        return Err(Error::InvalidInput(format!("b = {b} must be nonnegative")));
    }
    if class.dim() != design.dim() {
        return Err(Error::DimensionMismatch { expected: class.dim(), got: design.dim() });
    }
    if !class.vset().is_full() {
        return Ok(0.0);
    }
    let mut s = CompensatedSum::new();
    for i in 0..design.len() {
        let x = design.point(i);
        let (in_orthant, rise) = match direction {
            MonotoneOnlyDirection::HolderToMonotone => {
                (x.iter().all(|&v| v > 0.0), class.rise_plus(x))
            }
            MonotoneOnlyDirection::MonotoneToHolder => {
                (x.iter().all(|&v| v < 0.0), class.rise_minus(x))
            }
        };
        if in_orthant {
            let h = b - rise;
            if h > 0.0 {
                let hw = h / design.sigma()[i];
                s.add(hw * hw);
            }
        }
    }
    Ok(s.value().sqrt())
}

pub mod oracle;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{IndexSet, MonotoneNorm};
    use proptest::prelude::*;

    fn class2(gamma: f64, c: f64) -> HolderClass {
        HolderClass::new(gamma, c, IndexSet::full(2), MonotoneNorm::euclidean(2)).unwrap()
    }

    fn three_point_design() -> Design {
        Design::with_unit_sigma(vec![vec![0.5, 0.5], vec![-0.5, -0.5], vec![0.3, -0.2]]).unwrap()
    }

    fn three_point_pair() -> OrderedPair {
        OrderedPair::new(class2(1.0, 1.0), class2(1.0, 2.0)).unwrap()
    }

    // Frozen from an independent evaluation of the hinge formula:
    // offsets a = (1/sqrt(2), sqrt(2), 0.7), delta(b = 1.2) below.
    const THREE_POINT_DELTA_AT_1_2: f64 = 0.702_099_512_286_033_3;

    #[test]
    fn inverse_modulus_examples() {
        let pair = three_point_pair();
        let d = three_point_design();
        assert_eq!(inverse_modulus(&pair, &d, 0.0).unwrap(), 0.0);

        let got = inverse_modulus(&pair, &d, 1.2).unwrap();
        assert!((got - THREE_POINT_DELTA_AT_1_2).abs() < 1e-14);

        // Single point at the origin: both norm terms vanish, delta = b.
        let origin = Design::with_unit_sigma(vec![vec![0.0, 0.0]]).unwrap();
        let got = inverse_modulus(&pair, &origin, 0.37).unwrap();
        assert!((got - 0.37).abs() < 1e-15);
    }

    #[test]
    fn forward_round_trips_the_inverse() {
        let pair = three_point_pair();
        let d = three_point_design();
        let sol = forward_modulus(&pair, &d, THREE_POINT_DELTA_AT_1_2).unwrap();
        assert!((sol.b - 1.2).abs() < 1e-10, "b = {}", sol.b);

        // Binding constraint.
        let mut s = 0.0;
        for i in 0..3 {
            let r = (sol.f2_vals[i] - sol.f1_vals[i]) / d.sigma()[i];
            s += r * r;
        }
        assert!((s - sol.delta * sol.delta).abs() <= 1e-11 * sol.delta * sol.delta);
    }

    #[test]
    fn identity_modulus_at_origin_point() {
        let pair = three_point_pair();
        let origin = Design::with_unit_sigma(vec![vec![0.0, 0.0]]).unwrap();
        let sol = forward_modulus(&pair, &origin, 1.959964).unwrap();
        assert!((sol.b - 1.959964).abs() < 1e-12);
        assert!((sol.omega_prime - 1.0).abs() < 1e-12);
        assert_eq!(sol.active_points(), 1);
    }

    #[test]
    fn small_delta_limit_approaches_b_min() {
        let pair = three_point_pair();
        let d = three_point_design();
        let prob = ModulusProblem::new(&pair, &d).unwrap();
        // Offsets are (1/sqrt(2), sqrt(2), 0.7); the mixed-orthant point wins.
        let expected_b_min = 0.7;
        assert!((prob.b_min() - expected_b_min).abs() < 1e-15);
        let sol = prob.solve(1e-9).unwrap();
        assert!((sol.b - expected_b_min).abs() < 1e-8);
    }

    #[test]
    fn hinge_identity_d_equals_f2_minus_f1() {
        let d = three_point_design();
        for pair in [three_point_pair(), three_point_pair().swapped()] {
            let prob = ModulusProblem::new(&pair, &d).unwrap();
            let sol = prob.solve(0.9).unwrap();
            for i in 0..3 {
                let hinge = (sol.b - prob.offsets[i]).max(0.0);
                assert!((sol.d[i] - hinge).abs() < 1e-12);
                assert!(sol.f2_vals[i] >= sol.f1_vals[i] - 1e-12);
            }
        }
    }

    #[test]
    fn omega_prime_formula_and_errors() {
        let pair = three_point_pair();
        let d = three_point_design();
        let sol = forward_modulus(&pair, &d, 0.8).unwrap();
        let w = omega_prime(&sol, &d).unwrap();
        assert!((w - sol.omega_prime).abs() < 1e-15);

        // Homoskedastic sigma = c scales omega' by c^2 at fixed D.
        let dc = Design::new(
            vec![vec![0.5, 0.5], vec![-0.5, -0.5], vec![0.3, -0.2]],
            vec![2.0; 3],
        )
        .unwrap();
        let w_scaled = omega_prime(&sol, &dc).unwrap();
        assert!((w_scaled - 4.0 * w).abs() < 1e-12 * w.abs());

        let degenerate = ModulusSolution {
            b: 0.0,
            delta: 1.0,
            omega_prime: f64::NAN,
            f1_vals: vec![0.0; 3],
            f2_vals: vec![0.0; 3],
            d: vec![0.0; 3],
            sum_d_over_sigma2: 0.0,
            pair,
        };
        assert!(matches!(omega_prime(&degenerate, &d), Err(Error::DegenerateModulus)));
    }

    #[test]
    fn finite_difference_matches_omega_prime() {
        let pair = three_point_pair();
        let d = three_point_design();
        let prob = ModulusProblem::new(&pair, &d).unwrap();
        let delta = 0.9;
        let sol = prob.solve(delta).unwrap();
        let h = 1e-5 * delta;
        let up = prob.solve(delta + h).unwrap().b;
        let down = prob.solve(delta - h).unwrap().b;
        let fd = (up - down) / (2.0 * h);
        assert!(
            (fd - sol.omega_prime).abs() <= 1e-4 * sol.omega_prime.abs(),
            "fd = {fd}, formula = {}",
            sol.omega_prime
        );
    }

    #[test]
    fn monotone_only_examples() {
        let d = Design::with_unit_sigma(vec![
            vec![0.2, 0.3],
            vec![0.4, 0.1],
            vec![-0.3, 0.2],
            vec![-0.2, -0.4],
        ])
        .unwrap();
        let full = class2(1.0, 1.0);
        assert_eq!(
            inverse_modulus_monotone_only(&full, &d, 0.0, MonotoneOnlyDirection::HolderToMonotone)
                .unwrap(),
            0.0
        );

        // Proper subset of coordinates: identically zero on generic designs.
        let partial = HolderClass::new(
            1.0,
            1.0,
            IndexSet::new(2, &[1]).unwrap(),
            MonotoneNorm::euclidean(2),
        )
        .unwrap();
        assert_eq!(
            inverse_modulus_monotone_only(
                &partial,
                &d,
                1.7,
                MonotoneOnlyDirection::HolderToMonotone
            )
            .unwrap(),
            0.0
        );

        // Full V: only the two strictly positive points contribute.
        let b = 0.6;
        let got =
            inverse_modulus_monotone_only(&full, &d, b, MonotoneOnlyDirection::HolderToMonotone)
                .unwrap();
        let h1: f64 = b - (0.2f64 * 0.2 + 0.3 * 0.3).sqrt();
        let h2: f64 = b - (0.4f64 * 0.4 + 0.1 * 0.1).sqrt();
        let want = (h1.max(0.0).powi(2) + h2.max(0.0).powi(2)).sqrt();
        assert!((got - want).abs() < 1e-14);

        // Swapped direction picks up the strictly negative point.
        let got =
            inverse_modulus_monotone_only(&full, &d, b, MonotoneOnlyDirection::MonotoneToHolder)
                .unwrap();
        let h3: f64 = b - (0.2f64 * 0.2 + 0.4 * 0.4).sqrt();
        assert!((got - h3.max(0.0)).abs() < 1e-14);
    }

    #[test]
    fn zero_constant_class_is_the_constants() {
        // C = 0 collapses the small class to constants; formulas stay valid.
        let small = class2(1.0, 0.0);
        let big = class2(0.5, 1.0);
        let pair = OrderedPair::new(small, big).unwrap();
        let d = three_point_design();
        let prob = ModulusProblem::new(&pair, &d).unwrap();
        // offsets reduce to C_2 ||x_minus||^{1/2}.
        assert!((prob.offsets[0] - 0.0).abs() < 1e-15);
        let sol = prob.solve(1.3).unwrap();
        assert!(sol.b > 0.0);
        for i in 0..3 {
            assert_eq!(sol.f1_vals[i], 0.0);
        }
        let qp = crate::modulus::oracle::modulus_oracle(&pair, &d, sol.b).unwrap();
        assert!((qp - 1.3).abs() <= 1e-6 * 1.3, "qp {qp}");
    }

    #[test]
    fn rejects_unordered_pairs() {
        // gamma larger and C larger: not nested either way.
        let a = class2(1.0, 2.0);
        let b = class2(0.5, 1.0);
        assert!(OrderedPair::new(a.clone(), b.clone()).is_err());
        assert!(OrderedPair::new(b, a).is_err());
    }

    proptest! {
        // Convexity and monotonicity of the inverse modulus in b.
        #[test]
        fn inverse_modulus_convex_increasing(
            b1 in 0.0f64..2.0,
            b2 in 0.0f64..2.0,
            t in 0.0f64..1.0,
        ) {
            let pair = three_point_pair();
            let prob = ModulusProblem::new(&pair, &three_point_design()).unwrap();
            let (lo, hi) = if b1 <= b2 { (b1, b2) } else { (b2, b1) };
            prop_assert!(prob.inverse(lo) <= prob.inverse(hi) + 1e-12);
            let mid = t * b1 + (1.0 - t) * b2;
            let cost_mid = prob.inverse(mid).powi(2);
            let bound = t * prob.inverse(b1).powi(2) + (1.0 - t) * prob.inverse(b2).powi(2);
            prop_assert!(cost_mid <= bound + 1e-10);
        }

        // Enlarging the big class never shrinks the modulus at fixed delta.
        #[test]
        fn modulus_monotone_in_class_size(c2 in 1.0f64..3.0, g2 in 0.05f64..1.0, delta in 0.05f64..3.0) {
            let small = class2(1.0, 1.0);
            let big = class2(g2.min(1.0), c2.max(1.0));
            let bigger = class2(0.5 * g2.min(1.0), c2.max(1.0) * 1.5);
            let d = three_point_design();
            let pair1 = OrderedPair::new(small.clone(), big).unwrap();
            let pair2 = OrderedPair::new(small, bigger).unwrap();
            let b1 = forward_modulus(&pair1, &d, delta).unwrap().b;
            let b2 = forward_modulus(&pair2, &d, delta).unwrap().b;
            prop_assert!(b2 >= b1 - 1e-9 * (1.0 + b1));
        }

        // Round trip through forward/inverse.
        #[test]
        fn round_trip(b in 0.05f64..4.0) {
            let pair = three_point_pair();
            let prob = ModulusProblem::new(&pair, &three_point_design()).unwrap();
            let b = prob.b_min() + b;
            let delta = prob.inverse(b);
            let sol = prob.solve(delta).unwrap();
            prop_assert!((sol.b - b).abs() <= 1e-8 * b.max(1.0));
        }
    }
}
