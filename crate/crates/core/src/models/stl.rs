//! Decomposition forecasting: the seasonally adjusted series is forecast by a
//! non-seasonal ARIMA and re-seasonalised with one of three seasonal paths.

use super::arima::{auto_arima, ArimaConfig};
use super::decompose::{decompose, seasonal_variant, DecompositionMode, SeasonalVariant};
use super::{Bounds, RawForecast};
use crate::error::Result;
use crate::series::MonthKey;
use crate::stats;

pub(super) fn forecast(y: &[f64], start: MonthKey, variant: SeasonalVariant, horizon: usize) -> Result<RawForecast> {
    let dec = decompose(y, start, DecompositionMode::Multiplicative)?;
    let adjusted: Vec<f64> = y.iter().zip(&dec.seasonal).map(|(v, s)| v / s).collect();
    let fit = auto_arima(&adjusted, &ArimaConfig::non_seasonal())?;
    let trend = fit.point(horizon);
    let seasonal = seasonal_variant(&dec, variant, horizon)?;
    let mean: Vec<f64> = trend.iter().zip(&seasonal).map(|(t, s)| t * s).collect();

    let residuals: Vec<f64> = fit.residuals().iter().zip(&dec.seasonal).map(|(r, s)| r * s).collect();
    let finite: Vec<f64> = residuals.iter().copied().filter(|v| v.is_finite()).collect();
    let sd = if finite.len() > 1 { stats::std_dev(&finite, 1) } else { 0.0 };
    let sds = (1..=horizon).map(|h| sd * (h as f64).sqrt()).collect();
    Ok(RawForecast { mean, bounds: Bounds::StdDev(sds), residuals })
}
