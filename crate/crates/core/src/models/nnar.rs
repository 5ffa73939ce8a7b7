//! Feed-forward autoregressive network with one tanh hidden layer.

use rand::Rng;

use super::{Bounds, RawForecast, PERIOD};
use crate::error::{Error, Result};
use crate::stats;

#[derive(Debug, Clone, PartialEq)]
pub struct NnarConfig {
    /// Non-seasonal lags 1..=p.
    pub p: usize,
    /// Seasonal lags 12, 24, .. up to `seasonal_p` years.
    pub seasonal_p: usize,
    pub hidden: usize,
    pub restarts: usize,
    pub epochs: usize,
    pub step: f64,
}

impl Default for NnarConfig {
    fn default() -> Self {
        Self { p: 12, seasonal_p: 1, hidden: 7, restarts: 20, epochs: 300, step: 0.05 }
    }
}

impl NnarConfig {
    /// Sorted, de-duplicated input lags.
    pub fn lags(&self) -> Vec<usize> {
        let mut lags: Vec<usize> = (1..=self.p).chain((1..=self.seasonal_p).map(|k| k * PERIOD)).collect();
        lags.sort_unstable();
        lags.dedup();
        lags
    }
}

struct Net {
    w1: Vec<f64>, // hidden x inputs, row-major
    b1: Vec<f64>,
    w2: Vec<f64>,
    b2: f64,
    inputs: usize,
}

impl Net {
    fn random<R: Rng + ?Sized>(inputs: usize, hidden: usize, rng: &mut R) -> Self {
        let scale = 1.0 / (inputs as f64).sqrt();
        let mut u = |s: f64| rng.random_range(-s..s);
        Self {
            w1: (0..inputs * hidden).map(|_| u(scale)).collect(),
            b1: (0..hidden).map(|_| u(0.1)).collect(),
            w2: (0..hidden).map(|_| u(0.5)).collect(),
            b2: 0.0,
            inputs,
        }
    }

    fn hidden_out(&self, x: &[f64], h: &mut [f64]) {
        for (j, hj) in h.iter_mut().enumerate() {
            let row = &self.w1[j * self.inputs..(j + 1) * self.inputs];
            let z = self.b1[j] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
            *hj = z.tanh();
        }
    }

    fn predict(&self, x: &[f64]) -> f64 {
        let mut h = vec![0.0; self.b1.len()];
        self.hidden_out(x, &mut h);
        self.b2 + self.w2.iter().zip(&h).map(|(w, v)| w * v).sum::<f64>()
    }

    fn train(&mut self, xs: &[Vec<f64>], ys: &[f64], epochs: usize, step: f64) {
        let hidden = self.b1.len();
        let n = ys.len() as f64;
        let mut h = vec![0.0; hidden];
        let mut g_w1 = vec![0.0; self.w1.len()];
        let mut g_b1 = vec![0.0; hidden];
        let mut g_w2 = vec![0.0; hidden];
        for _ in 0..epochs {
            g_w1.iter_mut().for_each(|g| *g = 0.0);
            g_b1.iter_mut().for_each(|g| *g = 0.0);
            g_w2.iter_mut().for_each(|g| *g = 0.0);
            let mut g_b2 = 0.0;
            for (x, y) in xs.iter().zip(ys) {
                self.hidden_out(x, &mut h);
                let out = self.b2 + self.w2.iter().zip(&h).map(|(w, v)| w * v).sum::<f64>();
                let err = out - y;
                g_b2 += err;
                for j in 0..hidden {
                    g_w2[j] += err * h[j];
                    let delta = err * self.w2[j] * (1.0 - h[j] * h[j]);
                    g_b1[j] += delta;
                    let row = &mut g_w1[j * self.inputs..(j + 1) * self.inputs];
                    for (g, v) in row.iter_mut().zip(x) {
                        *g += delta * v;
                    }
                }
            }
            let s = step * 2.0 / n;
            self.b2 -= s * g_b2;
            for (w, g) in self.w2.iter_mut().zip(&g_w2) {
                *w -= s * g;
            }
            for (w, g) in self.b1.iter_mut().zip(&g_b1) {
                *w -= s * g;
            }
            for (w, g) in self.w1.iter_mut().zip(&g_w1) {
                *w -= s * g;
            }
        }
    }
}

pub(super) fn forecast<R: Rng + ?Sized>(y: &[f64], cfg: &NnarConfig, horizon: usize, rng: &mut R) -> Result<RawForecast> {
    let lags = cfg.lags();
    let max_lag = *lags.last().ok_or_else(|| Error::InvalidSpec("nnar needs at least one lag".into()))?;
    if cfg.hidden == 0 || cfg.restarts == 0 {
        return Err(Error::InvalidSpec("nnar needs hidden units and restarts".into()));
    }
    if y.len() <= max_lag + 1 {
        return Err(Error::SeriesTooShort { family: "nnar".into(), required: max_lag + 2, actual: y.len() });
    }
    let mu = stats::mean(y);
    let sd = stats::std_dev(y, 1);
    let sd = if sd > 0.0 && sd.is_finite() { sd } else { 1.0 };
    let z: Vec<f64> = y.iter().map(|v| (v - mu) / sd).collect();

    let inputs = |series: &[f64], t: usize| -> Vec<f64> { lags.iter().map(|l| series[t - l]).collect() };
    let xs: Vec<Vec<f64>> = (max_lag..z.len()).map(|t| inputs(&z, t)).collect();
    let ys: Vec<f64> = z[max_lag..].to_vec();

    let nets: Vec<Net> = (0..cfg.restarts)
        .map(|_| {
            let mut net = Net::random(lags.len(), cfg.hidden, rng);
            net.train(&xs, &ys, cfg.epochs, cfg.step);
            net
        })
        .collect();
    let ensemble = |x: &[f64]| nets.iter().map(|n| n.predict(x)).sum::<f64>() / nets.len() as f64;

    let mut residuals = vec![f64::NAN; max_lag];
    residuals.extend(xs.iter().zip(&ys).map(|(x, t)| (t - ensemble(x)) * sd));

    let mut path = z.clone();
    for _ in 0..horizon {
        let t = path.len();
        let next = ensemble(&inputs(&path, t));
        path.push(next);
    }
    let mean = path[z.len()..].iter().map(|v| v * sd + mu).collect();
    Ok(RawForecast { mean, bounds: Bounds::None, residuals })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn seasonal(n: usize) -> Vec<f64> {
        (0..n).map(|t| 100.0 + 20.0 * (2.0 * std::f64::consts::PI * t as f64 / 12.0).sin()).collect()
    }

    #[test]
    fn lag_union() {
        assert_eq!(NnarConfig::default().lags(), (1..=12).collect::<Vec<_>>());
        let cfg = NnarConfig { p: 2, ..NnarConfig::default() };
        assert_eq!(cfg.lags(), vec![1, 2, 12]);
    }

    #[test]
    fn same_seed_same_forecast() {
        let y = seasonal(60);
        let cfg = NnarConfig { restarts: 3, epochs: 50, ..NnarConfig::default() };
        let a = forecast(&y, &cfg, 6, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = forecast(&y, &cfg, 6, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a.mean, b.mean);
    }

    #[test]
    fn learns_a_clean_cycle() {
        let y = seasonal(84);
        let fc = forecast(&y, &NnarConfig::default(), 12, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let truth = seasonal(96);
        let rmse = (fc.mean.iter().zip(&truth[84..]).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / 12.0).sqrt();
        assert!(rmse < 5.0, "{rmse}");
    }
}
