//! Weighted `ℓ_p` norms that are monotone in coordinate magnitudes, and the
//! signed orthant projections used by every class formula.
//!
//! A vector norm qualifies here when replacing any `z_j` by a value of larger
//! magnitude never decreases the norm. Weighted `ℓ_p` norms with positive
//! weights all have this property; non-monotone norms are rejected at
//! construction, not approximated.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Weighted `ℓ_p` norm with strictly positive per-coordinate weights.
///
/// `p = f64::INFINITY` selects the max norm. `p ∈ {1, 2, ∞}` take exact
/// branches; other `p ≥ 1` go through a scaled power sum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotoneNorm {
    p: f64,
    weights: Vec<f64>,
}

impl MonotoneNorm {
    pub fn new(p: f64, weights: Vec<f64>) -> Result<Self> {
        if !(p >= 1.0) {
            return Err(Error::InvalidInput(format!("norm exponent p = {p} must be >= 1")));
        }
        for (i, &w) in weights.iter().enumerate() {
            if !(w > 0.0) || !w.is_finite() {
                return Err(Error::NonpositiveWeight { index: i, value: w });
            }
        }
        if weights.is_empty() {
            return Err(Error::InvalidInput("norm needs at least one coordinate".into()));
        }
        Ok(Self { p, weights })
    }

    /// Unweighted Euclidean norm on `ℝᵏ`.
    pub fn euclidean(k: usize) -> Self {
        Self { p: 2.0, weights: vec![1.0; k] }
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn exponent(&self) -> f64 {
        self.p
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Evaluates `‖z‖`.
    pub fn eval(&self, z: &[f64]) -> Result<f64> {
        if z.len() != self.weights.len() {
            return Err(Error::DimensionMismatch { expected: self.weights.len(), got: z.len() });
        }
        Ok(self.eval_mapped(|i| z[i]))
    }

    /// Norm of the vector whose `i`-th coordinate magnitude is `coord(i)`.
    ///
    /// Weighted `ℓ_p` norms depend only on coordinate magnitudes, so callers
    /// can feed projected coordinates directly and skip the intermediate
    /// vector. `coord` must return nonnegative values.
    pub(crate) fn eval_mapped(&self, coord: impl Fn(usize) -> f64) -> f64 {
        let k = self.weights.len();
        if self.p == 2.0 {
            let mut s = 0.0;
            for i in 0..k {
                let v = self.weights[i] * coord(i).abs();
                s += v * v;
            }
            s.sqrt()
        } else if self.p == 1.0 {
            (0..k).map(|i| self.weights[i] * coord(i).abs()).sum()
        } else if self.p.is_infinite() {
            (0..k).map(|i| self.weights[i] * coord(i).abs()).fold(0.0, f64::max)
        } else {
            // Scale by the max magnitude so the power sum cannot overflow.
            let vals: Vec<f64> = (0..k).map(|i| self.weights[i] * coord(i).abs()).collect();
            let m = vals.iter().fold(0.0f64, |a, &b| a.max(b));
            if m == 0.0 {
                return 0.0;
            }
            let s: f64 = vals.iter().map(|v| (v / m).powf(self.p)).sum();
            m * s.powf(1.0 / self.p)
        }
    }
}

/// The subset `𝒱 ⊆ {1,…,k}` of coordinates the function class is monotone in.
///
/// Externally coordinates are 1-indexed; internally everything is 0-indexed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexSet {
    k: usize,
    mask: Vec<bool>,
}

impl IndexSet {
    /// Builds from 1-indexed coordinate labels.
    pub fn new(k: usize, one_indexed: &[usize]) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidInput("ambient dimension must be >= 1".into()));
        }
        let mut mask = vec![false; k];
        for &j in one_indexed {
            if j == 0 || j > k {
                return Err(Error::InvalidInput(format!(
                    "monotone index {j} out of range 1..={k}"
                )));
            }
            if mask[j - 1] {
                return Err(Error::InvalidInput(format!("duplicate monotone index {j}")));
            }
            mask[j - 1] = true;
        }
        Ok(Self { k, mask })
    }

    /// All coordinates monotone.
    pub fn full(k: usize) -> Self {
        Self { k, mask: vec![true; k] }
    }

    /// No monotone coordinates (plain Hölder class).
    pub fn empty(k: usize) -> Self {
        Self { k, mask: vec![false; k] }
    }

    pub fn dim(&self) -> usize {
        self.k
    }

    /// Number of monotone coordinates `k₊`.
    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn contains(&self, zero_indexed: usize) -> bool {
        self.mask[zero_indexed]
    }

    pub fn is_full(&self) -> bool {
        self.mask.iter().all(|&m| m)
    }

    /// 1-indexed member labels, ascending.
    pub fn members_one_indexed(&self) -> Vec<usize> {
        self.mask
            .iter()
            .enumerate()
            .filter_map(|(i, &m)| m.then_some(i + 1))
            .collect()
    }

    /// `(z)_{𝒱+}`: clamps monotone coordinates at zero from below, passes the
    /// rest through.
    pub fn project_plus(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(z)?;
        Ok((0..self.k).map(|i| self.plus_coord(z, i)).collect())
    }

    /// `(z)_{𝒱−} = (−z)_{𝒱+}`.
    pub fn project_minus(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(z)?;
        Ok((0..self.k).map(|i| self.minus_coord(z, i)).collect())
    }

    #[inline]
    pub(crate) fn plus_coord(&self, z: &[f64], i: usize) -> f64 {
        if self.mask[i] {
            z[i].max(0.0)
        } else {
            z[i]
        }
    }

    #[inline]
    pub(crate) fn minus_coord(&self, z: &[f64], i: usize) -> f64 {
        if self.mask[i] {
            (-z[i]).max(0.0)
        } else {
            -z[i]
        }
    }

    fn check_dim(&self, z: &[f64]) -> Result<()> {
        if z.len() != self.k {
            return Err(Error::DimensionMismatch { expected: self.k, got: z.len() });
        }
        Ok(())
    }

    /// True when `x ⪰ z`: `x_j ≥ z_j` on `𝒱` and `x_j = z_j` off `𝒱`.
    pub fn dominates(&self, x: &[f64], z: &[f64]) -> bool {
        debug_assert_eq!(x.len(), self.k);
        debug_assert_eq!(z.len(), self.k);
        (0..self.k).all(|i| if self.mask[i] { x[i] >= z[i] } else { x[i] == z[i] })
    }
}

/// `‖(z)_{𝒱+}‖` without materializing the projected vector.
pub fn norm_proj_plus(norm: &MonotoneNorm, vset: &IndexSet, z: &[f64]) -> f64 {
    debug_assert_eq!(norm.dim(), vset.dim());
    norm.eval_mapped(|i| vset.plus_coord(z, i))
}

/// `‖(z)_{𝒱−}‖` without materializing the projected vector.
pub fn norm_proj_minus(norm: &MonotoneNorm, vset: &IndexSet, z: &[f64]) -> f64 {
    debug_assert_eq!(norm.dim(), vset.dim());
    norm.eval_mapped(|i| vset.minus_coord(z, i))
}
