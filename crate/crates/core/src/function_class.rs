//! Coordinate-wise monotone Hölder classes `Λ₊,𝒱(γ, C)`: descriptors, the
//! extremal envelope functions, ladder nesting checks, and a finite-sample
//! membership test.
//!
//! A finite value assignment `{(xᵤ, vᵤ)}` extends to a member of
//! `Λ₊,𝒱(γ, C)` exactly when `vᵤ − vᵥ ≤ C‖(xᵤ − xᵥ)_{𝒱+}‖^γ` for every
//! ordered pair. That one family subsumes both the plain Hölder bound
//! (projections never grow the norm) and monotonicity on comparable pairs
//! (the projection vanishes there), and it is what the envelope functions
//! attain with equality.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{norm_proj_minus, norm_proj_plus, IndexSet, MonotoneNorm};
use crate::modulus::Design;

/// Descriptor of one monotone Hölder class `Λ₊,𝒱(γ, C)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HolderClass {
    gamma: f64,
    c: f64,
    vset: IndexSet,
    norm: MonotoneNorm,
}

impl HolderClass {
    pub fn new(gamma: f64, c: f64, vset: IndexSet, norm: MonotoneNorm) -> Result<Self> {
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::InvalidInput(format!("gamma = {gamma} must lie in (0, 1]")));
        }
        if !(c >= 0.0) || !c.is_finite() {
            return Err(Error::InvalidInput(format!("C = {c} must be a finite nonnegative real")));
        }
        if vset.dim() != norm.dim() {
            return Err(Error::DimensionMismatch { expected: vset.dim(), got: norm.dim() });
        }
        Ok(Self { gamma, c, vset, norm })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn constant(&self) -> f64 {
        self.c
    }

    pub fn vset(&self) -> &IndexSet {
        &self.vset
    }

    pub fn norm(&self) -> &MonotoneNorm {
        &self.norm
    }

    pub fn dim(&self) -> usize {
        self.vset.dim()
    }

    /// `C‖(x)_{𝒱+}‖^γ`, the class's largest admissible increase from the
    /// origin to `x`.
    pub fn rise_plus(&self, x: &[f64]) -> f64 {
        self.c * norm_proj_plus(&self.norm, &self.vset, x).powf(self.gamma)
    }

    /// `C‖(x)_{𝒱−}‖^γ`, the largest admissible decrease.
    pub fn rise_minus(&self, x: &[f64]) -> f64 {
        self.c * norm_proj_minus(&self.norm, &self.vset, x).powf(self.gamma)
    }

    /// Largest admissible increment from `z` to `x`: `C‖(x−z)_{𝒱+}‖^γ`.
    pub fn increment_bound(&self, x: &[f64], z: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), z.len());
        let diff: Vec<f64> = x.iter().zip(z).map(|(a, b)| a - b).collect();
        self.rise_plus(&diff)
    }
}

/// Pointwise maximum over the class of all members with value `f0` at the
/// origin: `f0 + C‖(x)_{𝒱+}‖^γ`.
pub fn envelope_upper(class: &HolderClass, f0: f64, x: &[f64]) -> f64 {
    f0 + class.rise_plus(x)
}

/// Pointwise minimum: `f0 − C‖(x)_{𝒱−}‖^γ`.
pub fn envelope_lower(class: &HolderClass, f0: f64, x: &[f64]) -> f64 {
    f0 - class.rise_minus(x)
}

/// Tests whether a finite value assignment is consistent with membership in
/// the class (see the module docs for the exact constraint family).
///
/// Exactly coincident points with conflicting values are an error rather
/// than a `false`, since they usually indicate corrupted input.
pub fn membership_feasible(class: &HolderClass, points: &[(Vec<f64>, f64)]) -> Result<bool> {
    let tol = 1e-9;
    for (u, (xu, vu)) in points.iter().enumerate() {
        if xu.len() != class.dim() {
            return Err(Error::DimensionMismatch { expected: class.dim(), got: xu.len() });
        }
        for (v, (xv, vv)) in points.iter().enumerate() {
            if u == v {
                continue;
            }
            if xu == xv && vu != vv {
                return Err(Error::ConflictingValues { first: v.min(u), second: v.max(u) });
            }
            let bound = class.increment_bound(xu, xv);
            if vu - vv > bound + tol * (1.0 + vu.abs() + vv.abs() + bound) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// An ordered ladder `ℱ₁ ⊆ … ⊆ ℱ_J` of classes sharing norm and `𝒱`,
/// listed smallest (smoothest) first.
#[derive(Debug, Clone)]
pub struct ClassLadder {
    levels: Vec<HolderClass>,
}

impl ClassLadder {
    pub fn new(levels: Vec<HolderClass>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::InvalidInput("ladder needs at least one level".into()));
        }
        for w in levels.windows(2) {
            if w[0].vset() != w[1].vset() || w[0].norm() != w[1].norm() {
                return Err(Error::InvalidInput(
                    "all ladder levels must share the same norm and monotone index set".into(),
                ));
            }
            if w[1].gamma() > w[0].gamma() || w[1].constant() < w[0].constant() {
                return Err(Error::InvalidInput(
                    "ladder must have nonincreasing gamma and nondecreasing C".into(),
                ));
            }
        }
        Ok(Self { levels })
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn level(&self, j: usize) -> &HolderClass {
        &self.levels[j]
    }

    pub fn levels(&self) -> &[HolderClass] {
        &self.levels
    }

    /// The largest class `ℱ_J`, over which coverage is maintained.
    pub fn largest(&self) -> &HolderClass {
        self.levels.last().unwrap()
    }

    pub fn vset(&self) -> &IndexSet {
        self.levels[0].vset()
    }

    pub fn norm(&self) -> &MonotoneNorm {
        self.levels[0].norm()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct NestingWitness {
    /// 1-based level whose Hölder bound exceeds the largest class's bound.
    pub level: usize,
    pub point_i: usize,
    pub point_j: usize,
    pub distance: f64,
    pub small_class_bound: f64,
    pub large_class_bound: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct NestingReport {
    pub ok: bool,
    pub max_violation: f64,
    pub witness: Option<NestingWitness>,
}

/// Checks `C_j‖x−z‖^{γ_j} ≤ C_J‖x−z‖^{γ_J}` for every level and every design
/// point pair, i.e. that each `ℱ_j` is contained in `ℱ_J` over the working
/// support.
///
/// A cheap sufficient test on the design's bounding box runs first; the
/// exact pairwise scan only happens when that test is inconclusive.
pub fn check_nesting(ladder: &ClassLadder, design: &Design) -> NestingReport {
    let big = ladder.largest();
    let norm = ladder.norm();
    let n = design.len();

    // Distance budget below which every level is nested. gamma_j = gamma_J
    // levels are nested at any distance because C_j <= C_J.
    let mut budget = f64::INFINITY;
    for level in ladder.levels() {
        let (gj, cj) = (level.gamma(), level.constant());
        let (gb, cb) = (big.gamma(), big.constant());
        if gj > gb && cj > 0.0 {
            budget = budget.min((cb / cj).powf(1.0 / (gj - gb)));
        }
    }

    if budget.is_infinite() || n < 2 {
        return NestingReport { ok: true, max_violation: 0.0, witness: None };
    }

    // Bounding-box diameter bound: coordinate-wise widths dominate every
    // pairwise difference, so by norm monotonicity ‖widths‖ bounds dmax.
    let k = design.dim();
    let mut widths = vec![0.0; k];
    for c in 0..k {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let v = design.point(i)[c];
            lo = lo.min(v);
            hi = hi.max(v);
        }
        widths[c] = hi - lo;
    }
    if norm.eval(&widths).expect("dim checked") <= budget {
        return NestingReport { ok: true, max_violation: 0.0, witness: None };
    }

    let mut worst: Option<NestingWitness> = None;
    let mut max_violation = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let diff: Vec<f64> =
                design.point(i).iter().zip(design.point(j)).map(|(a, b)| a - b).collect();
            let d = norm.eval(&diff).expect("dim checked");
            if d <= budget {
                continue;
            }
            for (lv, level) in ladder.levels().iter().enumerate() {
                let lhs = level.constant() * d.powf(level.gamma());
                let rhs = big.constant() * d.powf(big.gamma());
                if lhs > rhs + 1e-12 * (1.0 + rhs) && lhs - rhs > max_violation {
                    max_violation = lhs - rhs;
                    worst = Some(NestingWitness {
                        level: lv + 1,
                        point_i: i,
                        point_j: j,
                        distance: d,
                        small_class_bound: lhs,
                        large_class_bound: rhs,
                    });
                }
            }
        }
    }
    NestingReport { ok: worst.is_none(), max_violation, witness: worst }
}

/// Conservative Hölder constant for exponent `gamma`:
/// `2 · max_{i≠j} |y_j − y_i| / ‖x_j − x_i‖^γ` over the design, in the
/// norm the classes use.
pub fn conservative_constant(
    design: &Design,
    y: &[f64],
    gamma: f64,
    norm: &MonotoneNorm,
) -> Result<f64> {
    if y.len() != design.len() {
        return Err(Error::DimensionMismatch { expected: design.len(), got: y.len() });
    }
    let mut best = 0.0f64;
    for i in 0..design.len() {
        for j in (i + 1)..design.len() {
            let diff: Vec<f64> =
                design.point(i).iter().zip(design.point(j)).map(|(a, b)| a - b).collect();
            let d = norm.eval(&diff)?;
            if d > 0.0 {
                best = best.max((y[j] - y[i]).abs() / d.powf(gamma));
            }
        }
    }
    Ok(2.0 * best)
}
