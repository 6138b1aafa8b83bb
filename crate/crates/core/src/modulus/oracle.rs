//! Brute-force verification oracle for the modulus closed forms.
//!
//! The inverse modulus problem restricted to the design points plus the
//! origin is a convex QP: minimize `Σ((f₂ᵢ − f₁ᵢ)/σᵢ)²` over the two value
//! vectors subject to `f₂(0) − f₁(0) = b` and, within each class, the
//! finite-sample membership constraints
//! `f(x) − f(z) ≤ C‖(x − z)_{𝒱+}‖^γ` for every ordered pair. The reduction
//! is exact because any feasible assignment extends to class members via the
//! envelope construction. The QP is solved with a log-barrier Newton
//! iteration; the objective Hessian is only positive semidefinite, but the
//! barrier term restores strict convexity.
//!
//! This path shares nothing with the closed-form hinge evaluation it checks.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::function_class::HolderClass;
use crate::geometry::IndexSet;
use crate::modulus::{Design, MonotoneOnlyDirection, OrderedPair};

/// Inverse modulus by direct QP: returns `ω⁻¹(b, ℱ_from, ℱ_to)`.
///
/// Intended for small designs (roughly `n ≤ 15`); cost grows quadratically
/// in the number of distinct points.
pub fn modulus_oracle(pair: &OrderedPair, design: &Design, b: f64) -> Result<f64> {
    let side1 = SideSpec::holder(pair.from_class(), 0.0);
    let side2 = SideSpec::holder(pair.to_class(), b);
    solve_inverse_qp(design, pair.from_class().vset(), side1, side2, b)
}

/// Inverse modulus against the pure monotone class, by direct QP with the
/// Hölder constraints dropped on the monotone-only side.
pub fn modulus_oracle_monotone_only(
    class: &HolderClass,
    design: &Design,
    b: f64,
    direction: MonotoneOnlyDirection,
) -> Result<f64> {
    let (side1, side2) = match direction {
        MonotoneOnlyDirection::HolderToMonotone => {
            (SideSpec::holder(class, 0.0), SideSpec::monotone_only(b))
        }
        MonotoneOnlyDirection::MonotoneToHolder => {
            (SideSpec::monotone_only(0.0), SideSpec::holder(class, b))
        }
    };
    solve_inverse_qp(design, class.vset(), side1, side2, b)
}

#[derive(Clone, Copy)]
enum SideKind<'a> {
    Holder(&'a HolderClass),
    MonotoneOnly,
}

#[derive(Clone, Copy)]
struct SideSpec<'a> {
    kind: SideKind<'a>,
    base: f64,
}

impl<'a> SideSpec<'a> {
    fn holder(class: &'a HolderClass, base: f64) -> Self {
        Self { kind: SideKind::Holder(class), base }
    }

    fn monotone_only(base: f64) -> Self {
        Self { kind: SideKind::MonotoneOnly, base }
    }

    /// Whole side collapses to a constant when the Hölder constant is zero.
    fn pinned_constant(&self) -> bool {
        matches!(self.kind, SideKind::Holder(c) if c.constant() == 0.0)
    }
}

#[derive(Clone, Copy)]
enum Val {
    Fixed(f64),
    Var(usize),
}

/// One inequality `x[u] − x[v] ≤ rhs`, with pinned endpoints folded into rhs.
struct Row {
    u: Option<usize>,
    v: Option<usize>,
    rhs: f64,
}

impl Row {
    fn slack(&self, x: &DVector<f64>) -> f64 {
        let mut s = self.rhs;
        if let Some(u) = self.u {
            s -= x[u];
        }
        if let Some(v) = self.v {
            s += x[v];
        }
        s
    }

    fn dir_derivative(&self, dx: &DVector<f64>) -> f64 {
        let mut d = 0.0;
        if let Some(u) = self.u {
            d += dx[u];
        }
        if let Some(v) = self.v {
            d -= dx[v];
        }
        d
    }
}

fn solve_inverse_qp(
    design: &Design,
    vset: &IndexSet,
    side1: SideSpec,
    side2: SideSpec,
    b: f64,
) -> Result<f64> {
    if !(b >= 0.0) || !b.is_finite() {
        return Err(Error::InvalidInput(format!("b = {b} must be nonnegative")));
    }
    if b == 0.0 {
        // f1 = f2 = 0 is feasible for every class here and the objective is
        // a sum of squares, so the optimum is exactly zero.
        return Ok(0.0);
    }

    // Merge coincident points and make sure the origin is present.
    let k = design.dim();
    let mut merged: Vec<Vec<f64>> = Vec::new();
    let mut map = Vec::with_capacity(design.len());
    for i in 0..design.len() {
        let p = design.point(i);
        let idx = merged.iter().position(|q| q.as_slice() == p).unwrap_or_else(|| {
            merged.push(p.to_vec());
            merged.len() - 1
        });
        map.push(idx);
    }
    let origin = vec![0.0; k];
    let origin_idx = merged.iter().position(|q| *q == origin).unwrap_or_else(|| {
        merged.push(origin.clone());
        merged.len() - 1
    });
    let m = merged.len();

    // Variable layout. The origin is pinned on both sides; a zero Hölder
    // constant pins its whole side to a constant.
    let sides = [side1, side2];
    let mut vals: Vec<Vec<Val>> = Vec::with_capacity(2);
    let mut nv = 0usize;
    for side in &sides {
        let mut v = Vec::with_capacity(m);
        for u in 0..m {
            if u == origin_idx || side.pinned_constant() {
                v.push(Val::Fixed(side.base));
            } else {
                v.push(Val::Var(nv));
                nv += 1;
            }
        }
        vals.push(v);
    }

    // Objective sum_i w_i (f2(x_i) - f1(x_i))^2 as 1/2 x'Hx + g'x + c0.
    let mut hess = DMatrix::zeros(nv, nv);
    let mut lin = DVector::zeros(nv);
    let mut c0 = 0.0;
    for (i, &mi) in map.iter().enumerate() {
        let s = design.sigma()[i];
        let w = 1.0 / (s * s);
        // form = f2 - f1 = sum c_j x_j + d
        let mut coeffs: Vec<(usize, f64)> = Vec::with_capacity(2);
        let mut d = 0.0;
        match vals[1][mi] {
            Val::Fixed(v) => d += v,
            Val::Var(j) => coeffs.push((j, 1.0)),
        }
        match vals[0][mi] {
            Val::Fixed(v) => d -= v,
            Val::Var(j) => coeffs.push((j, -1.0)),
        }
        for &(j1, cj1) in &coeffs {
            for &(j2, cj2) in &coeffs {
                hess[(j1, j2)] += 2.0 * w * cj1 * cj2;
            }
            lin[j1] += 2.0 * w * d * cj1;
        }
        c0 += w * d * d;
    }

    // Membership constraints per side. The monotone-only side keeps just the
    // comparable pairs (vanishing projected distance, zero bound).
    let mut rows: Vec<Row> = Vec::new();
    for (side, val) in sides.iter().zip(&vals) {
        for u in 0..m {
            for v in 0..m {
                if u == v {
                    continue;
                }
                let diff: Vec<f64> =
                    merged[u].iter().zip(&merged[v]).map(|(a, b)| a - b).collect();
                let bound = match side.kind {
                    SideKind::Holder(class) => class.rise_plus(&diff),
                    SideKind::MonotoneOnly => {
                        let proj: f64 = (0..k)
                            .map(|i| vset.plus_coord(&diff, i).abs())
                            .fold(0.0, f64::max);
                        if proj > 0.0 {
                            continue;
                        }
                        0.0
                    }
                };
                let mut rhs = bound;
                let ru = match val[u] {
                    Val::Var(j) => Some(j),
                    Val::Fixed(fv) => {
                        rhs -= fv;
                        None
                    }
                };
                let rv = match val[v] {
                    Val::Var(j) => Some(j),
                    Val::Fixed(fv) => {
                        rhs += fv;
                        None
                    }
                };
                if ru.is_none() && rv.is_none() {
                    continue;
                }
                rows.push(Row { u: ru, v: rv, rhs });
            }
        }
    }

    if nv == 0 {
        return Ok(c0.max(0.0).sqrt());
    }

    // Strictly feasible start: ride the monotone score s(p) = sum of V
    // coordinates, scaled small enough that every bound keeps slack.
    let score = |p: &[f64]| -> f64 {
        (0..k).filter(|&i| vset.contains(i)).map(|i| p[i]).sum()
    };
    let mut x = DVector::zeros(nv);
    for (side, val) in sides.iter().zip(&vals) {
        let mut eps = 1.0f64;
        for u in 0..m {
            for v in 0..m {
                if u == v {
                    continue;
                }
                let ds = score(&merged[u]) - score(&merged[v]);
                if ds <= 0.0 {
                    continue;
                }
                let diff: Vec<f64> =
                    merged[u].iter().zip(&merged[v]).map(|(a, b)| a - b).collect();
                let bound = match side.kind {
                    SideKind::Holder(class) => class.rise_plus(&diff),
                    SideKind::MonotoneOnly => continue,
                };
                if bound > 0.0 {
                    eps = eps.min(0.5 * bound / ds);
                }
            }
        }
        for u in 0..m {
            if let Val::Var(j) = val[u] {
                x[j] = side.base + eps * score(&merged[u]);
            }
        }
    }
    for row in &rows {
        if row.slack(&x) <= 0.0 {
            return Err(Error::NonConvergence { iterations: 0 });
        }
    }

    let objective = |x: &DVector<f64>| -> f64 {
        0.5 * (x.transpose() * &hess * x)[(0, 0)] + lin.dot(x) + c0
    };

    // Log-barrier outer loop.
    let n_rows = rows.len() as f64;
    let mut t = (n_rows / (1.0 + objective(&x).abs())).max(1.0);
    let mut total_iters = 0usize;
    loop {
        // Newton centering for t * q(x) + phi(x).
        for _ in 0..120 {
            total_iters += 1;
            if total_iters > 4000 {
                return Err(Error::NonConvergence { iterations: total_iters });
            }
            let mut grad = (&hess * &x + &lin) * t;
            let mut h = &hess * t;
            for row in &rows {
                let s = row.slack(&x);
                let inv = 1.0 / s;
                let inv2 = inv * inv;
                if let Some(u) = row.u {
                    grad[u] += inv;
                    h[(u, u)] += inv2;
                }
                if let Some(v) = row.v {
                    grad[v] -= inv;
                    h[(v, v)] += inv2;
                }
                if let (Some(u), Some(v)) = (row.u, row.v) {
                    h[(u, v)] -= inv2;
                    h[(v, u)] -= inv2;
                }
            }
            let chol = match Cholesky::new(h.clone()) {
                Some(c) => c,
                None => {
                    let ridge = 1e-12 * (1.0 + h.diagonal().amax());
                    let mut hr = h;
                    for i in 0..nv {
                        hr[(i, i)] += ridge;
                    }
                    Cholesky::new(hr).ok_or(Error::NonConvergence { iterations: total_iters })?
                }
            };
            let dx = chol.solve(&(-&grad));
            let decrement = -grad.dot(&dx);
            if decrement <= 2e-11 {
                break;
            }

            // Largest feasible step, then Armijo backtracking.
            let mut alpha = 1.0f64;
            for row in &rows {
                let d = row.dir_derivative(&dx);
                if d > 0.0 {
                    alpha = alpha.min(0.99 * row.slack(&x) / d);
                }
            }
            let barrier = |x: &DVector<f64>| -> f64 {
                let mut p = t * objective(x);
                for row in &rows {
                    let s = row.slack(x);
                    if s <= 0.0 {
                        return f64::INFINITY;
                    }
                    p -= s.ln();
                }
                p
            };
            let f0 = barrier(&x);
            let slope = grad.dot(&dx);
            let mut ls = 0;
            loop {
                let cand = &x + &dx * alpha;
                if barrier(&cand) <= f0 + 0.25 * alpha * slope {
                    x = cand;
                    break;
                }
                alpha *= 0.5;
                ls += 1;
                if ls > 60 {
                    x += &dx * alpha;
                    break;
                }
            }
        }

        let gap = n_rows / t;
        if gap <= 1e-11 * (1.0 + objective(&x).abs()) {
            break;
        }
        t *= 20.0;
    }

    Ok(objective(&x).max(0.0).sqrt())
}
