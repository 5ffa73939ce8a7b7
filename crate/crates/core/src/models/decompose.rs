//! Classical seasonal decomposition: centred 2x12 moving-average trend,
//! per-calendar-month medians of detrended values, strictly periodic
//! seasonal component.

use super::PERIOD;
use crate::error::{Error, Result};
use crate::series::MonthKey;
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecompositionMode {
    Multiplicative,
    Additive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub start: MonthKey,
    pub mode: DecompositionMode,
    pub trend: Vec<f64>,
    pub seasonal: Vec<f64>,
    pub remainder: Vec<f64>,
}

impl Decomposition {
    /// Seasonal index by calendar month (`[0]` is January).
    pub fn seasonal_index(&self) -> [f64; 12] {
        let mut idx = [0.0; 12];
        for (i, s) in self.seasonal.iter().enumerate().take(PERIOD) {
            idx[self.start.add(i as i32).month() as usize - 1] = *s;
        }
        idx
    }

    /// Seasonal factor for any calendar month.
    pub fn factor_for(&self, month: MonthKey) -> f64 {
        self.seasonal_index()[month.month() as usize - 1]
    }

    /// Year-specific seasonal factors: seasonal combined with remainder
    /// (`y / trend` or `y - trend`).
    pub fn seasonal_irregular(&self) -> Vec<f64> {
        match self.mode {
            DecompositionMode::Multiplicative => {
                self.seasonal.iter().zip(&self.remainder).map(|(s, r)| s * r).collect()
            }
            DecompositionMode::Additive => self.seasonal.iter().zip(&self.remainder).map(|(s, r)| s + r).collect(),
        }
    }

    pub fn reconstruct(&self) -> Vec<f64> {
        (0..self.trend.len())
            .map(|i| match self.mode {
                DecompositionMode::Multiplicative => self.trend[i] * self.seasonal[i] * self.remainder[i],
                DecompositionMode::Additive => self.trend[i] + self.seasonal[i] + self.remainder[i],
            })
            .collect()
    }
}

/// Centred 2x12 moving average, flat-extended over the six months at each end.
fn centred_trend(y: &[f64]) -> Vec<f64> {
    let n = y.len();
    let half = PERIOD / 2;
    let mut trend = vec![0.0; n];
    for t in half..n - half {
        let mut s = 0.5 * (y[t - half] + y[t + half]);
        for v in &y[t - half + 1..t + half] {
            s += v;
        }
        trend[t] = s / PERIOD as f64;
    }
    let first = trend[half];
    let last = trend[n - half - 1];
    trend[..half].iter_mut().for_each(|v| *v = first);
    trend[n - half..].iter_mut().for_each(|v| *v = last);
    trend
}

pub fn decompose(y: &[f64], start: MonthKey, mode: DecompositionMode) -> Result<Decomposition> {
    let n = y.len();
    if n < 2 * PERIOD + 1 {
        return Err(Error::InsufficientHistory { required: 2 * PERIOD + 1, actual: n });
    }
    if mode == DecompositionMode::Multiplicative {
        if let Some(i) = y.iter().position(|v| *v <= 0.0) {
            return Err(Error::NonPositiveValue(i));
        }
    }
    let trend = centred_trend(y);
    let half = PERIOD / 2;
    let mut by_month: Vec<Vec<f64>> = vec![Vec::new(); PERIOD];
    for t in half..n - half {
        let detrended = match mode {
            DecompositionMode::Multiplicative => y[t] / trend[t],
            DecompositionMode::Additive => y[t] - trend[t],
        };
        by_month[t % PERIOD].push(detrended);
    }
    let mut index: Vec<f64> = by_month.iter().map(|v| stats::median(v)).collect();
    let centre = stats::mean(&index);
    match mode {
        DecompositionMode::Multiplicative => index.iter_mut().for_each(|s| *s /= centre),
        DecompositionMode::Additive => index.iter_mut().for_each(|s| *s -= centre),
    }
    let seasonal: Vec<f64> = (0..n).map(|t| index[t % PERIOD]).collect();
    let remainder = (0..n)
        .map(|t| match mode {
            DecompositionMode::Multiplicative => y[t] / (trend[t] * seasonal[t]),
            DecompositionMode::Additive => y[t] - trend[t] - seasonal[t],
        })
        .collect();
    Ok(Decomposition { start, mode, trend, seasonal, remainder })
}

/// Strength of seasonality `max(0, 1 - var(R) / var(S + R))` from an
/// additive decomposition; `None` when the series is too short.
pub fn seasonal_strength(y: &[f64]) -> Option<f64> {
    let dec = decompose(y, MonthKey::from_index(0), DecompositionMode::Additive).ok()?;
    let sr: Vec<f64> = dec.seasonal.iter().zip(&dec.remainder).map(|(s, r)| s + r).collect();
    let var_sr = stats::variance(&sr, 1);
    if !(var_sr > 0.0) {
        return Some(0.0);
    }
    Some((1.0 - stats::variance(&dec.remainder, 1) / var_sr).max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SeasonalVariant {
    /// Mean of the last three years' factors per calendar month.
    A,
    /// Last year's factors.
    B,
    /// Per-calendar-month AR(1) forecast of the yearly factor series.
    C,
}

/// Smallest factor a forecast seasonal path may take in multiplicative mode.
const MIN_FACTOR: f64 = 1e-3;

/// Seasonal path for the `horizon` months after the decomposition ends,
/// built from year-specific factors.
pub fn seasonal_variant(dec: &Decomposition, variant: SeasonalVariant, horizon: usize) -> Result<Vec<f64>> {
    let n = dec.trend.len();
    let required = match variant {
        SeasonalVariant::A => 3 * PERIOD,
        SeasonalVariant::B => PERIOD,
        SeasonalVariant::C => 2 * PERIOD,
    };
    if n < required {
        return Err(Error::InsufficientHistory { required, actual: n });
    }
    let si = dec.seasonal_irregular();
    // Past months sharing the calendar phase of forecast step h, oldest first.
    let occurrences = |h: usize| -> Vec<f64> { (0..n).filter(|t| (n - 1 + h - t).is_multiple_of(PERIOD)).map(|t| si[t]).collect() };
    let path = (1..=horizon)
        .map(|h| {
            let years_ahead = (h - 1) / PERIOD + 1;
            let hist = occurrences(h);
            let value = match variant {
                SeasonalVariant::A => stats::mean(&hist[hist.len() - 3..]),
                SeasonalVariant::B => hist[hist.len() - 1],
                SeasonalVariant::C => ar1_forecast(&hist, years_ahead),
            };
            match dec.mode {
                DecompositionMode::Multiplicative => value.max(MIN_FACTOR),
                DecompositionMode::Additive => value,
            }
        })
        .collect();
    Ok(path)
}

/// AR(1) with intercept fitted by least squares on consecutive pairs, then
/// iterated `steps` ahead. Falls back to the mean when the lagged values are
/// constant and to the last value with fewer than two pairs.
pub fn ar1_forecast(x: &[f64], steps: usize) -> f64 {
    let last = *x.last().expect("non-empty factor history");
    if x.len() < 3 {
        return last;
    }
    let lagged = &x[..x.len() - 1];
    let lead = &x[1..];
    let (mx, my) = (stats::mean(lagged), stats::mean(lead));
    let sxx: f64 = lagged.iter().map(|v| (v - mx).powi(2)).sum();
    let (phi, c) = if sxx <= 1e-24 {
        (0.0, my)
    } else {
        let sxy: f64 = lagged.iter().zip(lead).map(|(a, b)| (a - mx) * (b - my)).sum();
        let phi = (sxy / sxx).clamp(-1.0, 1.0);
        (phi, my - phi * mx)
    };
    let mut v = last;
    for _ in 0..steps {
        v = c + phi * v;
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    const INDEX: [f64; 12] = [0.8, 0.85, 0.95, 1.0, 1.05, 1.1, 1.3, 1.25, 1.0, 0.95, 0.9, 0.85];

    fn jan() -> MonthKey {
        MonthKey::new(2015, 1).unwrap()
    }

    #[test]
    fn recovers_known_seasonal_index() {
        let mean = INDEX.iter().sum::<f64>() / 12.0;
        let idx: Vec<f64> = INDEX.iter().map(|v| v / mean).collect();
        let y: Vec<f64> = (0..48).map(|t| 100.0 * idx[t % 12]).collect();
        let dec = decompose(&y, jan(), DecompositionMode::Multiplicative).unwrap();
        for (t, s) in dec.seasonal.iter().enumerate() {
            assert!((s / idx[t % 12] - 1.0).abs() < 1e-6);
        }
        assert_eq!(dec.seasonal_index()[6], dec.seasonal[6]);
    }

    #[test]
    fn constant_series() {
        let dec = decompose(&vec![7.0; 30], jan(), DecompositionMode::Multiplicative).unwrap();
        assert!(dec.seasonal.iter().all(|s| (s - 1.0).abs() < 1e-12));
        assert!(dec.trend.iter().all(|t| (t - 7.0).abs() < 1e-12));
    }

    #[test]
    fn reconstruction_and_normalisation() {
        let y: Vec<f64> = (0..61).map(|t| (50.0 + t as f64) * INDEX[t % 12] * (1.0 + 0.03 * ((t * 7) % 5) as f64)).collect();
        let dec = decompose(&y, jan(), DecompositionMode::Multiplicative).unwrap();
        for (a, b) in dec.reconstruct().iter().zip(&y) {
            assert!((a / b - 1.0).abs() < 1e-9);
        }
        for cycle in dec.seasonal.chunks_exact(12) {
            assert!((cycle.iter().sum::<f64>() / 12.0 - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn multiplicative_rejects_zero() {
        let mut y = vec![5.0; 30];
        y[3] = 0.0;
        assert_eq!(decompose(&y, jan(), DecompositionMode::Multiplicative).unwrap_err(), Error::NonPositiveValue(3));
        assert!(decompose(&y[..20], jan(), DecompositionMode::Additive).is_err());
    }

    fn dec_from_si(si: Vec<f64>) -> Decomposition {
        let n = si.len();
        Decomposition {
            start: jan(),
            mode: DecompositionMode::Multiplicative,
            trend: vec![1.0; n],
            seasonal: vec![1.0; n],
            remainder: si,
        }
    }

    #[test]
    fn variants_agree_on_stable_factors() {
        let si: Vec<f64> = (0..48).map(|t| INDEX[t % 12]).collect();
        let dec = dec_from_si(si);
        let a = seasonal_variant(&dec, SeasonalVariant::A, 24).unwrap();
        let b = seasonal_variant(&dec, SeasonalVariant::B, 24).unwrap();
        let c = seasonal_variant(&dec, SeasonalVariant::C, 24).unwrap();
        for h in 0..24 {
            assert!((a[h] - INDEX[h % 12]).abs() < 1e-12);
            assert!((a[h] - b[h]).abs() < 1e-12 && (a[h] - c[h]).abs() < 1e-12);
        }
    }

    #[test]
    fn variant_a_is_three_year_mean() {
        let mut si: Vec<f64> = vec![1.0; 36];
        si[2] = 0.9;
        si[14] = 1.0;
        si[26] = 1.1;
        let a = seasonal_variant(&dec_from_si(si), SeasonalVariant::A, 12).unwrap();
        assert!((a[2] - 1.0).abs() < 1e-12);
        assert!(seasonal_variant(&dec_from_si(vec![1.0; 30]), SeasonalVariant::A, 12).is_err());
    }

    #[test]
    fn variant_c_extrapolates_linear_drift() {
        // Factors for each month drift by +0.05 per year.
        let si: Vec<f64> = (0..36).map(|t| INDEX[t % 12] + 0.05 * (t / 12) as f64).collect();
        let c = seasonal_variant(&dec_from_si(si), SeasonalVariant::C, 24).unwrap();
        for h in 0..24 {
            let expected = INDEX[h % 12] + 0.05 * (3 + h / 12) as f64;
            assert!((c[h] - expected).abs() < 1e-9, "h={h} {} vs {expected}", c[h]);
        }
    }
}
