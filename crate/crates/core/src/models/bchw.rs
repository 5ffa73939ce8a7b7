//! Box-Cox transformed additive Holt-Winters, used in place of a full
//! trigonometric state-space model.

use super::ets::{self, EtsKind};
use super::{Bounds, RawForecast, PERIOD};
use crate::error::Result;
use crate::stats;
use crate::stats::Z80;

pub fn box_cox(x: f64, lambda: f64) -> f64 {
    if lambda.abs() < 1e-12 {
        x.ln()
    } else {
        (x.powf(lambda) - 1.0) / lambda
    }
}

/// Inverse transform; the median of the back-transformed distribution.
pub fn inv_box_cox(z: f64, lambda: f64) -> f64 {
    if lambda.abs() < 1e-12 {
        z.exp()
    } else {
        let base = lambda * z + 1.0;
        if base <= 0.0 { 0.0 } else { base.powf(1.0 / lambda) }
    }
}

/// Guerrero's method: the lambda that makes `sd / mean^(1 - lambda)` most
/// constant across non-overlapping seasonal subseries. Grid over
/// `[-1, 2]` in steps of 0.1 (restricted to positive lambda if any value is 0).
pub fn guerrero_lambda(y: &[f64], period: usize) -> f64 {
    let groups: Vec<(f64, f64)> = y
        .chunks_exact(period)
        .map(|c| (stats::mean(c), stats::std_dev(c, 1)))
        .filter(|(m, s)| *m > 0.0 && s.is_finite())
        .collect();
    if groups.len() < 2 {
        return 1.0;
    }
    let positive_only = y.iter().any(|v| *v <= 0.0);
    let mut best = (f64::INFINITY, 1.0);
    for i in 0..=30 {
        let lambda = -1.0 + 0.1 * i as f64;
        if positive_only && lambda <= 0.0 {
            continue;
        }
        let ratios: Vec<f64> = groups.iter().map(|(m, s)| s / m.powf(1.0 - lambda)).collect();
        let mean = stats::mean(&ratios);
        if mean <= 0.0 {
            continue;
        }
        let cv = stats::std_dev(&ratios, 1) / mean;
        if cv < best.0 - 1e-12 {
            best = (cv, lambda);
        }
    }
    (best.1 * 10.0).round() / 10.0
}

pub(super) fn forecast(y: &[f64], horizon: usize) -> Result<RawForecast> {
    let lambda = guerrero_lambda(y, PERIOD);
    let z: Vec<f64> = y.iter().map(|v| box_cox(*v, lambda)).collect();
    let fit = ets::fit(&z, EtsKind::HoltWinters)?;
    let point = fit.point(horizon);
    let res: Vec<f64> = fit.residuals().to_vec();
    let sd = stats::std_dev(&res, 1);
    let mean = point.iter().map(|v| inv_box_cox(*v, lambda)).collect();
    let lower = point
        .iter()
        .enumerate()
        .map(|(h, v)| inv_box_cox(v - Z80 * sd * ((h + 1) as f64).sqrt(), lambda))
        .collect();
    let upper = point
        .iter()
        .enumerate()
        .map(|(h, v)| inv_box_cox(v + Z80 * sd * ((h + 1) as f64).sqrt(), lambda))
        .collect();
    // Residuals on the original scale: observed minus back-transformed fit.
    let residuals = z
        .iter()
        .zip(&res)
        .zip(y)
        .map(|((zt, e), yt)| yt - inv_box_cox(zt - e, lambda))
        .collect();
    Ok(RawForecast { mean, bounds: Bounds::Explicit(lower, upper), residuals })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transform_round_trip() {
        for lambda in [-1.0, -0.3, 0.0, 0.5, 1.0, 2.0] {
            for x in [0.5, 1.0, 7.0, 1234.5] {
                assert!((inv_box_cox(box_cox(x, lambda), lambda) / x - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn guerrero_prefers_log_for_proportional_spread() {
        // Seasonal amplitude proportional to level: a log transform stabilises it.
        let y: Vec<f64> = (0..96)
            .map(|t| {
                let level = 100.0 * 1.05f64.powi(t);
                level * (1.0 + 0.3 * (2.0 * std::f64::consts::PI * t as f64 / 12.0).sin())
            })
            .collect();
        let lambda = guerrero_lambda(&y, 12);
        assert!(lambda.abs() <= 0.2, "{lambda}");
    }
}
