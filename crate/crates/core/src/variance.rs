//! Homoskedastic noise variance from a kernel smoother fit.
//!
//! `σ̂² = Σ(yᵢ − r̂(xᵢ))² / (n − 2ν₁ + ν₂)` with `r̂` the row-normalized
//! Gaussian-kernel regression fit, `ν₁ = tr(L)`, `ν₂ = tr(LᵀL)`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::CompensatedSum;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SmootherTrace {
    pub nu1: f64,
    pub nu2: f64,
    pub bandwidth: f64,
}

/// Rule-of-thumb bandwidth `n^{-1/(k+4)}` times the geometric mean of the
/// per-coordinate standard deviations.
pub fn rule_of_thumb_bandwidth(points: &[Vec<f64>]) -> Result<f64> {
    let n = points.len();
    if n < 2 {
        return Err(Error::InvalidInput("need at least two points for a bandwidth".into()));
    }
    let k = points[0].len();
    let mut log_gm = 0.0;
    for c in 0..k {
        let mean = points.iter().map(|p| p[c]).sum::<f64>() / n as f64;
        let var =
            points.iter().map(|p| (p[c] - mean) * (p[c] - mean)).sum::<f64>() / (n as f64 - 1.0);
        if var <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "coordinate {} is constant; supply a bandwidth explicitly",
                c + 1
            )));
        }
        log_gm += 0.5 * var.ln();
    }
    let gm = (log_gm / k as f64).exp();
    Ok((n as f64).powf(-1.0 / (k as f64 + 4.0)) * gm)
}

/// Variance estimate from the Nadaraya-Watson residuals.
///
/// Errors with `DegenerateDof` when the bandwidth is so small that the
/// smoother matrix degenerates toward the identity.
pub fn estimate_sigma2(
    points: &[Vec<f64>],
    y: &[f64],
    bandwidth: f64,
) -> Result<(f64, SmootherTrace)> {
    let n = points.len();
    if n < 3 {
        return Err(Error::InvalidInput(format!("need at least 3 observations, got {n}")));
    }
    if y.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: y.len() });
    }
    if !(bandwidth > 0.0) || !bandwidth.is_finite() {
        return Err(Error::InvalidInput(format!("bandwidth = {bandwidth} must be positive")));
    }
    let k = points[0].len();
    for (i, p) in points.iter().enumerate() {
        if p.len() != k {
            return Err(Error::DimensionMismatch { expected: k, got: p.len() });
        }
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite coordinate at row {i}")));
        }
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite response value".into()));
    }

    // Row blocks are independent, so parallel assembly stays deterministic.
    let rows: Vec<(f64, f64, f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut weights = Vec::with_capacity(n);
            let mut row_sum = CompensatedSum::new();
            for j in 0..n {
                let mut d2 = 0.0;
                for c in 0..k {
                    let d = (points[i][c] - points[j][c]) / bandwidth;
                    d2 += d * d;
                }
                let w = (-0.5 * d2).exp();
                weights.push(w);
                row_sum.add(w);
            }
            let total = row_sum.value();
            let mut fit = CompensatedSum::new();
            let mut sq = CompensatedSum::new();
            for j in 0..n {
                let l = weights[j] / total;
                fit.add(l * y[j]);
                sq.add(l * l);
            }
            // (diagonal entry, squared row norm, fitted value)
            (weights[i] / total, sq.value(), fit.value())
        })
        .collect();

    let mut nu1 = CompensatedSum::new();
    let mut nu2 = CompensatedSum::new();
    let mut rss = CompensatedSum::new();
    for (i, (diag, sq, fit)) in rows.iter().enumerate() {
        nu1.add(*diag);
        nu2.add(*sq);
        let r = y[i] - fit;
        rss.add(r * r);
    }
    let nu1 = nu1.value();
    let nu2 = nu2.value();
    let dof = n as f64 - 2.0 * nu1 + nu2;
    if dof <= 1e-8 * n as f64 {
        return Err(Error::DegenerateDof { dof });
    }
    Ok((rss.value() / dof, SmootherTrace { nu1, nu2, bandwidth }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn hand_computed_instance() {
        // 1-D points 0..3, y = (0,1,0,1), bandwidth 1. Frozen from a direct
        // dense-matrix evaluation of L, nu1, nu2 and the residuals.
        let pts: Vec<Vec<f64>> = (0..4).map(|i| vec![i as f64]).collect();
        let y = [0.0, 1.0, 0.0, 1.0];
        let (s2, tr) = estimate_sigma2(&pts, &y, 1.0).unwrap();
        assert!((tr.nu1 - 1.992_562_526_679_232_6).abs() < 1e-12);
        assert!((tr.nu2 - 1.538_394_837_423_381_1).abs() < 1e-12);
        assert!((s2 - 0.503_408_571_588_081_39).abs() < 1e-12);
    }

    #[test]
    fn constant_data_has_zero_variance() {
        let pts: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64 * 0.5, -(i as f64)]).collect();
        let y = [3.25; 6];
        let (s2, _) = estimate_sigma2(&pts, &y, 0.8).unwrap();
        assert!(s2.abs() < 1e-22);
    }

    #[test]
    fn shift_invariance() {
        let pts: Vec<Vec<f64>> = (0..8).map(|i| vec![(i as f64).sin()]).collect();
        let y: Vec<f64> = (0..8).map(|i| (i as f64).cos()).collect();
        let shifted: Vec<f64> = y.iter().map(|v| v + 100.0).collect();
        let (a, _) = estimate_sigma2(&pts, &y, 0.7).unwrap();
        let (b, _) = estimate_sigma2(&pts, &shifted, 0.7).unwrap();
        assert!((a - b).abs() < 1e-9 * (1.0 + a));
    }

    #[test]
    fn tiny_bandwidth_degenerates() {
        let pts: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64]).collect();
        let y = [0.0, 1.0, 0.0, 1.0, 0.0];
        assert!(matches!(
            estimate_sigma2(&pts, &y, 1e-4),
            Err(Error::DegenerateDof { .. })
        ));
    }

    #[test]
    fn rejects_nan() {
        let pts = vec![vec![0.0], vec![1.0], vec![2.0]];
        assert!(estimate_sigma2(&pts, &[0.0, f64::NAN, 1.0], 1.0).is_err());
    }

    #[test]
    fn recovers_noise_scale_roughly() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 1000;
        let pts: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.gen_range(-1.0..1.0)]).collect();
        let sigma = 0.7;
        let y: Vec<f64> = pts
            .iter()
            .map(|p| (2.0 * p[0]).sin() + sigma * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let h = rule_of_thumb_bandwidth(&pts).unwrap();
        let (s2, _) = estimate_sigma2(&pts, &y, h).unwrap();
        assert!(
            (s2 - sigma * sigma).abs() < 0.1 * sigma * sigma,
            "sigma2 = {s2}, truth {}",
            sigma * sigma
        );
    }
}
