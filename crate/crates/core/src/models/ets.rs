//! Additive-error exponential smoothing: simple, Holt linear trend and
//! additive Holt-Winters, in error-correction form
//!
//! ```text
//! e_t = y_t - (l + b + s_{t-m})
//! l  <- l + b + alpha e_t
//! b  <- b + beta e_t
//! s_t = s_{t-m} + gamma e_t
//! ```
//!
//! with `beta = alpha * beta*`, `gamma = (1 - alpha) * gamma*`, `beta*, gamma*`
//! in (0, 1). Parameters and initial level/slope are chosen by least squares.

use super::{Bounds, RawForecast, PERIOD};
use crate::error::{Error, Result};
use crate::optim::{logistic, logit, NelderMead};
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EtsKind {
    Simple,
    Holt,
    HoltWinters,
}

impl EtsKind {
    fn has_trend(self) -> bool {
        !matches!(self, EtsKind::Simple)
    }

    fn has_season(self) -> bool {
        matches!(self, EtsKind::HoltWinters)
    }
}

#[derive(Debug, Clone)]
pub struct EtsFit {
    pub kind: EtsKind,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub sigma2: f64,
    pub aicc: f64,
    level: f64,
    slope: f64,
    season: Vec<f64>,
    n: usize,
    residuals: Vec<f64>,
}

struct Params {
    alpha: f64,
    beta: f64,
    gamma: f64,
    level0: f64,
    slope0: f64,
}

struct RunOutput {
    sse: f64,
    level: f64,
    slope: f64,
    season: Vec<f64>,
    residuals: Vec<f64>,
}

fn run(y: &[f64], p: &Params, season0: &[f64], keep_residuals: bool) -> RunOutput {
    let m = season0.len().max(1);
    let mut season = season0.to_vec();
    let (mut l, mut b) = (p.level0, p.slope0);
    let mut sse = 0.0;
    let mut residuals = if keep_residuals { Vec::with_capacity(y.len()) } else { Vec::new() };
    for (t, &obs) in y.iter().enumerate() {
        let s = if season.is_empty() { 0.0 } else { season[t % m] };
        let e = obs - (l + b + s);
        sse += e * e;
        if keep_residuals {
            residuals.push(e);
        }
        l = l + b + p.alpha * e;
        b += p.beta * e;
        if !season.is_empty() {
            season[t % m] = s + p.gamma * e;
        }
    }
    RunOutput { sse, level: l, slope: b, season, residuals }
}

fn initial_states(y: &[f64], kind: EtsKind) -> (f64, f64, Vec<f64>) {
    let m = PERIOD;
    if kind.has_season() {
        let cycles = (y.len() / m).min(2);
        let means: Vec<f64> = (0..cycles).map(|c| stats::mean(&y[c * m..(c + 1) * m])).collect();
        let mut season: Vec<f64> = (0..m)
            .map(|j| (0..cycles).map(|c| y[c * m + j] - means[c]).sum::<f64>() / cycles as f64)
            .collect();
        let centre = stats::mean(&season);
        season.iter_mut().for_each(|s| *s -= centre);
        let slope = if cycles >= 2 { (means[1] - means[0]) / m as f64 } else { 0.0 };
        // Level at t = -1, half a cycle before the centre of the first cycle.
        let level = means[0] - slope * (m as f64 + 1.0) / 2.0;
        (level, slope, season)
    } else if kind.has_trend() {
        (y[0], y[1] - y[0], Vec::new())
    } else {
        (y[0], 0.0, Vec::new())
    }
}

/// Least-squares fit of one ETS form.
pub fn fit(y: &[f64], kind: EtsKind) -> Result<EtsFit> {
    let n = y.len();
    let m = PERIOD;
    if kind.has_season() && n < 2 * m {
        return Err(Error::SeriesTooShort { family: "hw".into(), required: 2 * m, actual: n });
    }
    let (level_init, slope_init, season0) = initial_states(y, kind);
    let scale = stats::std_dev(y, 0).max(1e-8 * stats::mean(y).abs()).max(1e-12);

    let unpack = |u: &[f64]| -> Params {
        let alpha = 1e-4 + (0.9999 - 1e-4) * logistic(u[0]);
        let mut i = 1;
        let beta = if kind.has_trend() {
            i += 1;
            alpha * 0.9999 * logistic(u[1])
        } else {
            0.0
        };
        let gamma = if kind.has_season() {
            let g = (1.0 - alpha) * 0.9999 * logistic(u[i]);
            i += 1;
            g
        } else {
            0.0
        };
        let level0 = level_init + scale * u[i];
        let slope0 = if kind.has_trend() { slope_init + scale * u[i + 1] / 12.0 } else { 0.0 };
        Params { alpha, beta, gamma, level0, slope0 }
    };

    let mut x0 = vec![logit(0.3)];
    if kind.has_trend() {
        x0.push(logit(0.1));
    }
    if kind.has_season() {
        x0.push(logit(0.1));
    }
    x0.push(0.0);
    if kind.has_trend() {
        x0.push(0.0);
    }
    let nm = NelderMead::default().with_max_evals(300 * x0.len()).with_step(0.5);
    let best = nm.minimize(|u| run(y, &unpack(u), &season0, false).sse, &x0);
    if !best.value.is_finite() {
        return Err(Error::NonConvergence { family: "ets".into(), diagnostics: format!("sse={}", best.value) });
    }
    let p = unpack(&best.x);
    let out = run(y, &p, &season0, true);

    let n_params = 1
        + usize::from(kind.has_trend()) * 2
        + usize::from(kind.has_season()) * (1 + m - 1)
        + 1;
    let dof = n.saturating_sub(n_params).max(1);
    let sigma2 = out.sse / dof as f64;
    let k = (n_params + 1) as f64;
    let nf = n as f64;
    let aicc = if nf - k - 1.0 > 0.0 {
        nf * (out.sse.max(1e-300) / nf).ln() + 2.0 * k + 2.0 * k * (k + 1.0) / (nf - k - 1.0)
    } else {
        f64::INFINITY
    };
    Ok(EtsFit {
        kind,
        alpha: p.alpha,
        beta: p.beta,
        gamma: p.gamma,
        sigma2,
        aicc,
        level: out.level,
        slope: out.slope,
        season: out.season,
        n,
        residuals: out.residuals,
    })
}

/// Chooses among the three forms by AICc.
pub fn fit_auto(y: &[f64]) -> Result<EtsFit> {
    let mut kinds = vec![EtsKind::Simple, EtsKind::Holt];
    if y.len() >= 2 * PERIOD + 2 {
        kinds.push(EtsKind::HoltWinters);
    }
    let fits: Vec<EtsFit> = kinds.into_iter().filter_map(|k| fit(y, k).ok()).collect();
    fits.into_iter()
        .min_by(|a, b| a.aicc.total_cmp(&b.aicc))
        .ok_or_else(|| Error::NonConvergence { family: "ets".into(), diagnostics: "no candidate fitted".into() })
}

impl EtsFit {
    pub fn residuals(&self) -> &[f64] {
        &self.residuals
    }

    /// Point forecasts for steps 1..=horizon.
    pub fn point(&self, horizon: usize) -> Vec<f64> {
        let m = self.season.len();
        (1..=horizon)
            .map(|h| {
                let s = if m == 0 { 0.0 } else { self.season[(self.n + h - 1) % m] };
                self.level + h as f64 * self.slope + s
            })
            .collect()
    }

    /// Forecast standard deviations from the additive-error variance
    /// recursion `sigma^2 (1 + sum_{j<h} c_j^2)`, `c_j = alpha + beta j + gamma [j mod m = 0]`.
    pub fn forecast_sd(&self, horizon: usize) -> Vec<f64> {
        let m = PERIOD;
        let mut acc = 0.0;
        (1..=horizon)
            .map(|h| {
                if h > 1 {
                    let j = h - 1;
                    let seasonal = if self.kind.has_season() && j % m == 0 { self.gamma } else { 0.0 };
                    let c = self.alpha + self.beta * j as f64 + seasonal;
                    acc += c * c;
                }
                (self.sigma2 * (1.0 + acc)).sqrt()
            })
            .collect()
    }

    pub(super) fn raw_forecast(&self, horizon: usize) -> RawForecast {
        RawForecast {
            mean: self.point(horizon),
            bounds: Bounds::StdDev(self.forecast_sd(horizon)),
            residuals: self.residuals.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_series_forecasts_constant() {
        let y = vec![42.0; 30];
        let f = fit(&y, EtsKind::Simple).unwrap();
        for v in f.point(6) {
            assert!((v - 42.0).abs() < 1e-6, "{v}");
        }
    }

    #[test]
    fn ses_variance_recursion_closed_form() {
        let y: Vec<f64> = (0..40).map(|t| 10.0 + ((t * 7919) % 13) as f64 / 13.0).collect();
        let f = fit(&y, EtsKind::Simple).unwrap();
        let sd = f.forecast_sd(6);
        for (h, s) in sd.iter().enumerate() {
            let expected = (f.sigma2 * (1.0 + h as f64 * f.alpha * f.alpha)).sqrt();
            assert!((s - expected).abs() < 1e-12);
        }
        assert!(sd.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn holt_follows_a_line() {
        let y: Vec<f64> = (0..30).map(|t| 5.0 + 2.0 * t as f64).collect();
        let f = fit(&y, EtsKind::Holt).unwrap();
        let p = f.point(3);
        for (h, v) in p.iter().enumerate() {
            assert!((v - (5.0 + 2.0 * (30 + h) as f64)).abs() < 1e-3, "{v}");
        }
    }

    #[test]
    fn holt_winters_recovers_pure_seasonality() {
        let pattern = [3.0, -1.0, 4.0, -1.0, 5.0, -9.0, 2.0, -6.0, 5.0, -3.0, 5.0, -4.0];
        let y: Vec<f64> = (0..48).map(|t| 100.0 + pattern[t % 12]).collect();
        let f = fit(&y, EtsKind::HoltWinters).unwrap();
        for (h, v) in f.point(12).iter().enumerate() {
            assert!((v - (100.0 + pattern[(48 + h) % 12])).abs() < 1e-2, "h={h} {v}");
        }
    }
}
