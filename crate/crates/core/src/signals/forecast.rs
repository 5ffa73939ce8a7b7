//! Index-ratio, exogenous-regressor and flight-growth forecasting strategies.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg;
use crate::models::{auto_arima, fit_forecast, ArimaConfig, ModelSpec, PERIOD};
use crate::series::{MonthKey, MonthlySeries};
use crate::stats;

/// Composite values for every month in `from..=to`. Months past the end of
/// the index (or unobserved) take the value of the latest observed month
/// one or more whole years earlier.
pub fn composite_path(composite: &MonthlySeries, from: MonthKey, to: MonthKey) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    let mut month = from;
    while month <= to {
        let mut probe = month;
        let value = loop {
            if probe < composite.start() {
                return Err(Error::OutOfRange(format!("composite has no value for {month} or a year earlier")));
            }
            if let Some(v) = composite.get(probe) {
                break v;
            }
            probe = probe.add(-(PERIOD as i32));
        };
        out.push(value);
        month = month.succ();
    }
    Ok(out)
}

/// Trailing window over which arrivals and the lagged composite are both
/// observed, ending at the last arrivals month.
struct Aligned {
    y: Vec<f64>,
    x: Vec<f64>,
    /// Regressor over the forecast horizon.
    x_future: Vec<f64>,
}

fn align(arrivals: &MonthlySeries, composite: &MonthlySeries, lag: usize, horizon: usize) -> Result<Aligned> {
    let lag = lag as i32;
    let mut y = Vec::new();
    let mut x = Vec::new();
    for i in (0..arrivals.len()).rev() {
        let month = arrivals.month_at(i);
        match (arrivals.values()[i], composite.get(month.add(-lag))) {
            (Some(a), Some(c)) => {
                y.push(a);
                x.push(c);
            }
            _ => break,
        }
    }
    y.reverse();
    x.reverse();
    if y.len() < 3 {
        return Err(Error::InsufficientOverlap { lag: lag as usize, overlap: y.len() });
    }
    let end = arrivals.end();
    let x_future = composite_path(composite, end.add(1 - lag), end.add(horizon as i32 - lag))?;
    Ok(Aligned { y, x, x_future })
}

/// Forecasts the arrivals-to-index ratio with SES, Holt-Winters and the
/// Box-Cox Holt-Winters model (those the window length allows), averages
/// them and multiplies by the index over the horizon.
pub fn ratio_forecast(arrivals: &MonthlySeries, composite: &MonthlySeries, lag: usize, horizon: usize) -> Result<Vec<f64>> {
    let data = align(arrivals, composite, lag, horizon)?;
    let end = arrivals.end();
    if let Some(i) = data.x.iter().position(|v| *v <= 0.0) {
        let month = end.add(i as i32 + 1 - data.x.len() as i32 - lag as i32);
        return Err(Error::ZeroIndex(month.to_string()));
    }
    if let Some(i) = data.x_future.iter().position(|v| *v <= 0.0) {
        return Err(Error::ZeroIndex(end.add(i as i32 + 1 - lag as i32).to_string()));
    }
    let ratio: Vec<f64> = data.y.iter().zip(&data.x).map(|(a, c)| a / c).collect();
    let start = end.add(1 - ratio.len() as i32);
    let series = MonthlySeries::from_values("ratio", start, &ratio)?;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut paths = Vec::new();
    let mut last_err = None;
    for spec in [ModelSpec::Ses, ModelSpec::HoltWinters, ModelSpec::Bchw] {
        if series.len() < spec.min_length() {
            continue;
        }
        match fit_forecast(&series, &spec, horizon, &mut rng) {
            Ok(f) => paths.push(f.mean),
            Err(e) => last_err = Some(e),
        }
    }
    if paths.is_empty() {
        return Err(last_err.unwrap_or(Error::SeriesTooShort { family: "ses".into(), required: 3, actual: series.len() }));
    }
    Ok((0..horizon)
        .map(|h| {
            let r = paths.iter().map(|p| p[h]).sum::<f64>() / paths.len() as f64;
            (r * data.x_future[h]).max(0.0)
        })
        .collect())
}

fn has_variance(x: &[f64]) -> bool {
    x.len() > 1 && stats::variance(x, 1) > 1e-12 * stats::mean(x).abs().max(1.0).powi(2)
}

/// Regression on the lagged index with ARIMA errors (estimated in two
/// steps), averaged with a trend + month-dummy + index least-squares model.
pub fn exog_forecast(arrivals: &MonthlySeries, composite: &MonthlySeries, lag: usize, horizon: usize) -> Result<Vec<f64>> {
    let data = align(arrivals, composite, lag, horizon)?;
    let a = regression_arima(&data.y, &data.x, &data.x_future, horizon)?;
    let b = trend_dummy_regression(&data.y, &data.x, &data.x_future, arrivals.end(), horizon)?;
    Ok(a.iter().zip(&b).map(|(p, q)| 0.5 * (p.max(0.0) + q.max(0.0))).collect())
}

fn regression_arima(y: &[f64], x: &[f64], x_future: &[f64], horizon: usize) -> Result<Vec<f64>> {
    if !has_variance(x) {
        return Ok(auto_arima(y, &ArimaConfig::default())?.point(horizon));
    }
    let design = DMatrix::from_fn(y.len(), 2, |t, j| if j == 0 { 1.0 } else { x[t] });
    let beta = linalg::least_squares(&design, &DVector::from_column_slice(y)).ok_or(Error::DegenerateX)?;
    let resid: Vec<f64> = (0..y.len()).map(|t| y[t] - beta[0] - beta[1] * x[t]).collect();
    let noise = auto_arima(&resid, &ArimaConfig::default())?.point(horizon);
    Ok((0..horizon).map(|h| beta[0] + beta[1] * x_future[h] + noise[h]).collect())
}

fn trend_dummy_regression(y: &[f64], x: &[f64], x_future: &[f64], end: MonthKey, horizon: usize) -> Result<Vec<f64>> {
    let n = y.len();
    let start = end.add(1 - n as i32);
    let use_x = has_variance(x);
    let cols = 2 + (PERIOD - 1) + usize::from(use_x);
    if n <= cols {
        return Err(Error::InsufficientHistory { required: cols + 1, actual: n });
    }
    let row = |t: i64, month: MonthKey, xv: f64| -> Vec<f64> {
        let mut r = vec![1.0, t as f64];
        r.extend((2..=PERIOD as u32).map(|m| if month.month() == m { 1.0 } else { 0.0 }));
        if use_x {
            r.push(xv);
        }
        r
    };
    let rows: Vec<Vec<f64>> = (0..n).map(|t| row(t as i64, start.add(t as i32), x[t])).collect();
    let design = DMatrix::from_fn(n, cols, |t, j| rows[t][j]);
    let beta = linalg::least_squares(&design, &DVector::from_column_slice(y))
        .ok_or_else(|| Error::NonConvergence { family: "trend regression".into(), diagnostics: "singular design".into() })?;
    Ok((0..horizon)
        .map(|h| {
            let r = row((n + h) as i64, end.add(h as i32 + 1), x_future[h]);
            r.iter().zip(beta.iter()).map(|(a, b)| a * b).sum()
        })
        .collect())
}

/// Scales the last observed arrivals by flight growth relative to that month.
pub fn flight_forecast(arrivals: &MonthlySeries, flights: &MonthlySeries, horizon: usize) -> Result<Vec<f64>> {
    let base_month = arrivals.last_observed().ok_or_else(|| Error::AllMissing(arrivals.name().to_string()))?;
    let base = arrivals.get(base_month).expect("last observed month has a value");
    let no_data = |what: String| Error::NoFlightData(format!("{}: {what}", arrivals.name()));
    let f0 = flights.get(base_month).ok_or_else(|| no_data(format!("no flights at {base_month}")))?;
    if f0 <= 0.0 {
        return Err(no_data(format!("zero flights at {base_month}")));
    }
    (1..=horizon)
        .map(|h| {
            let month = base_month.add(h as i32);
            flights.get(month).map(|f| base * f / f0).ok_or_else(|| no_data(format!("no flights at {month}")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    fn month(y: i32, m: u32) -> MonthKey {
        MonthKey::new(y, m).unwrap()
    }

    #[test]
    fn constant_ratio_scales_the_index() {
        let start = month(2019, 1);
        let index: Vec<f64> = (0..41).map(|t| 50.0 + 10.0 * (t as f64 * 0.5).sin()).collect();
        let composite = MonthlySeries::from_values("c", start, &index).unwrap();
        // arrivals_t = 3 * index_{t-1}
        let arr: Vec<f64> = (1..36).map(|t| 3.0 * index[t - 1]).collect();
        let arrivals = MonthlySeries::from_values("a", start.add(1), &arr).unwrap();
        let path = ratio_forecast(&arrivals, &composite, 1, 5).unwrap();
        for h in 0..5 {
            assert!((path[h] - 3.0 * index[35 + h]).abs() < 1e-6, "{h}: {} vs {}", path[h], 3.0 * index[35 + h]);
        }
    }

    #[test]
    fn zero_index_is_rejected() {
        let start = month(2019, 1);
        let composite = MonthlySeries::from_values("c", start, &[0.0; 30]).unwrap();
        let arrivals = MonthlySeries::from_values("a", start, &[1.0; 30]).unwrap();
        assert!(matches!(ratio_forecast(&arrivals, &composite, 1, 3), Err(Error::ZeroIndex(_))));
    }

    #[test]
    fn index_extends_by_seasonal_naive() {
        let c = MonthlySeries::from_values("c", month(2020, 1), &(1..=24).map(f64::from).collect::<Vec<_>>()).unwrap();
        assert_eq!(composite_path(&c, month(2021, 11), month(2022, 2)).unwrap(), vec![23.0, 24.0, 13.0, 14.0]);
    }

    #[test]
    fn exog_recovers_a_linear_link() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let start = month(2018, 1);
        let index: Vec<f64> = (0..53).map(|t| 40.0 + 15.0 * (t as f64 * 0.52).sin() + 0.3 * t as f64).collect();
        let composite = MonthlySeries::from_values("c", start, &index).unwrap();
        let arr: Vec<f64> = (1..48).map(|t| 2.0 * index[t - 1] + noise.sample(&mut rng)).collect();
        let arrivals = MonthlySeries::from_values("a", start.add(1), &arr).unwrap();
        let path = exog_forecast(&arrivals, &composite, 1, 5).unwrap();
        for h in 0..5 {
            assert!((path[h] - 2.0 * index[47 + h]).abs() < 4.0, "{h}: {}", path[h]);
        }
        let flat = MonthlySeries::from_values("c", start, &[10.0; 53]).unwrap();
        assert_eq!(exog_forecast(&arrivals, &flat, 1, 5).unwrap().len(), 5);
    }

    #[test]
    fn flights_scale_the_baseline() {
        let arrivals = MonthlySeries::new("a", month(2023, 1), vec![Some(80.0), Some(100.0), None]).unwrap();
        let flights = MonthlySeries::from_values("f", month(2023, 1), &[5.0, 10.0, 20.0, 15.0]).unwrap();
        assert_eq!(flight_forecast(&arrivals, &flights, 2).unwrap(), vec![200.0, 150.0]);
        let scaled = MonthlySeries::from_values("f", month(2023, 1), &[50.0, 100.0, 200.0, 150.0]).unwrap();
        assert_eq!(flight_forecast(&arrivals, &scaled, 2).unwrap(), vec![200.0, 150.0]);
        let zero = MonthlySeries::from_values("f", month(2023, 1), &[5.0, 0.0, 20.0, 15.0]).unwrap();
        assert!(matches!(flight_forecast(&arrivals, &zero, 2), Err(Error::NoFlightData(_))));
    }
}
