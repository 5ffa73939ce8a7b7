use nalgebra::{Matrix2, Vector2};

use super::MonthlySeries;
use crate::error::{Error, Result};

/// Local-linear-trend state-space model:
///
/// ```text
/// y_t      = mu_t + eps_t          eps  ~ N(0, obs_var)
/// mu_{t+1} = mu_t + beta_t + eta_t eta  ~ N(0, level_var)
/// beta_{t+1} = beta_t + zeta_t     zeta ~ N(0, slope_var)
/// ```
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalLinearTrend {
    pub obs_var: f64,
    pub level_var: f64,
    pub slope_var: f64,
}

/// Prior variance multiplier for the (approximately) diffuse initial state.
const DIFFUSE_SCALE: f64 = 1e6;

impl LocalLinearTrend {
    /// Method-of-moments estimate from the autocovariances of second
    /// differences of the observed values:
    /// `g0 = slope + 2 level + 6 obs`, `g1 = -level - 4 obs`, `g2 = obs`.
    pub fn estimate(values: &[Option<f64>]) -> Self {
        let observed: Vec<f64> = values.iter().flatten().copied().collect();
        let scale = scale_sq(&observed);
        let floor = 1e-8 * scale + 1e-12;

        let d2: Vec<Option<f64>> = (2..values.len())
            .map(|t| match (values[t - 2], values[t - 1], values[t]) {
                (Some(a), Some(b), Some(c)) => Some(c - 2.0 * b + a),
                _ => None,
            })
            .collect();
        let present: Vec<f64> = d2.iter().flatten().copied().collect();
        if present.len() < 6 {
            let v = 0.01 * scale + floor;
            return Self { obs_var: v, level_var: v, slope_var: v };
        }
        let mean = present.iter().sum::<f64>() / present.len() as f64;
        let autocov = |lag: usize| -> f64 {
            let mut acc = 0.0;
            let mut n = 0usize;
            for t in lag..d2.len() {
                if let (Some(a), Some(b)) = (d2[t], d2[t - lag]) {
                    acc += (a - mean) * (b - mean);
                    n += 1;
                }
            }
            if n == 0 { 0.0 } else { acc / n as f64 }
        };
        let (g0, g1, g2) = (autocov(0), autocov(1), autocov(2));
        let obs_var = g2.max(floor);
        let level_var = (-g1 - 4.0 * obs_var).max(floor);
        let slope_var = (g0 - 2.0 * level_var - 6.0 * obs_var).max(floor);
        Self { obs_var, level_var, slope_var }
    }

    /// Fixed-interval (Rauch-Tung-Striebel) smoothed level for every index.
    pub fn smooth(&self, values: &[Option<f64>]) -> Vec<f64> {
        let n = values.len();
        let observed: Vec<f64> = values.iter().flatten().copied().collect();
        let first = observed.first().copied().unwrap_or(0.0);
        let kappa = DIFFUSE_SCALE * scale_sq(&observed).max(1.0);

        let transition = Matrix2::new(1.0, 1.0, 0.0, 1.0);
        let q = Matrix2::new(self.level_var, 0.0, 0.0, self.slope_var);

        let mut pred_x = Vec::with_capacity(n);
        let mut pred_p = Vec::with_capacity(n);
        let mut filt_x = Vec::with_capacity(n);
        let mut filt_p = Vec::with_capacity(n);

        let mut x = Vector2::new(first, 0.0);
        let mut p = Matrix2::identity() * kappa;
        for (t, obs) in values.iter().enumerate() {
            if t > 0 {
                x = transition * x;
                p = transition * p * transition.transpose() + q;
            }
            pred_x.push(x);
            pred_p.push(p);
            if let Some(y) = *obs {
                let f = p[(0, 0)] + self.obs_var;
                let gain = Vector2::new(p[(0, 0)], p[(1, 0)]) / f;
                x += gain * (y - x[0]);
                // Joseph form keeps P symmetric positive semi-definite.
                let i_kz = Matrix2::new(1.0 - gain[0], 0.0, -gain[1], 1.0);
                p = i_kz * p * i_kz.transpose() + gain * gain.transpose() * self.obs_var;
            }
            filt_x.push(x);
            filt_p.push(p);
        }

        let mut smoothed = vec![Vector2::zeros(); n];
        smoothed[n - 1] = filt_x[n - 1];
        for t in (0..n.saturating_sub(1)).rev() {
            let inv = pred_p[t + 1].try_inverse().unwrap_or_else(Matrix2::zeros);
            let j = filt_p[t] * transition.transpose() * inv;
            smoothed[t] = filt_x[t] + j * (smoothed[t + 1] - pred_x[t + 1]);
        }
        smoothed.iter().map(|s| s[0]).collect()
    }
}

fn scale_sq(observed: &[f64]) -> f64 {
    if observed.is_empty() {
        return 1.0;
    }
    let n = observed.len() as f64;
    let mean = observed.iter().sum::<f64>() / n;
    let var = observed.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    if var > 0.0 { var } else { (mean * mean).max(1.0) * 1e-4 }
}

/// Fills missing months with the smoothed level of a local-linear-trend
/// model. Observed values pass through untouched; imputed values are clamped
/// at zero.
pub fn impute(series: &MonthlySeries) -> Result<MonthlySeries> {
    if series.observed_count() < 2 {
        return Err(Error::AllMissing(series.name().to_string()));
    }
    if series.is_complete() {
        return Ok(series.clone());
    }
    let model = LocalLinearTrend::estimate(series.values());
    let level = model.smooth(series.values());
    let filled = series
        .values()
        .iter()
        .zip(level)
        .map(|(v, s)| Some(v.unwrap_or(s.max(0.0))))
        .collect();
    MonthlySeries::new(series.name(), series.start(), filled)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::MonthKey;

    fn series(values: Vec<Option<f64>>) -> MonthlySeries {
        MonthlySeries::new("x", MonthKey::new(2020, 1).unwrap(), values).unwrap()
    }

    #[test]
    fn three_point_gap_is_linear() {
        let out = impute(&series(vec![Some(10.0), None, Some(30.0)])).unwrap();
        let v = out.dense().unwrap();
        assert_eq!(v[0], 10.0);
        assert_eq!(v[2], 30.0);
        assert!((v[1] - 20.0).abs() < 1e-6, "{}", v[1]);
    }

    #[test]
    fn constant_series_stays_constant() {
        let out = impute(&series(vec![Some(5.0), Some(5.0), None, Some(5.0)])).unwrap();
        let v = out.dense().unwrap();
        assert!((v[2] - 5.0).abs() < 1e-6, "{}", v[2]);
    }

    #[test]
    fn too_few_observations() {
        let err = impute(&series(vec![Some(5.0), None, None])).unwrap_err();
        assert!(matches!(err, Error::AllMissing(_)));
    }

    #[test]
    fn imputed_values_are_clamped() {
        // A steep decline extrapolated past the last observation goes negative.
        let out = impute(&series(vec![Some(100.0), Some(50.0), Some(1.0), None, None])).unwrap();
        assert!(out.dense().unwrap().iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn idempotent() {
        let s = series(vec![Some(3.0), None, Some(7.0), Some(8.0), None, Some(12.0), Some(11.0)]);
        let once = impute(&s).unwrap();
        assert_eq!(impute(&once).unwrap(), once);
    }
}
