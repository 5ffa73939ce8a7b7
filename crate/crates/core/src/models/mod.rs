//! Univariate base-forecast model zoo.
//!
//! Every family fits on a complete (imputed) monthly series and returns a
//! point path plus, where the family supports one, an 80% Gaussian interval.
//! Point and bound paths are clamped at zero at the output boundary only.

mod arima;
mod bchw;
mod decompose;
mod ets;
mod naive;
mod nnar;
mod stl;

pub use arima::{auto_arima, fit_arima, ArimaConfig, ArimaFit, ArimaOrder};
pub use bchw::{box_cox, guerrero_lambda, inv_box_cox};
pub use decompose::{decompose, seasonal_strength, seasonal_variant, DecompositionMode, Decomposition, SeasonalVariant};
pub use ets::{EtsFit, EtsKind};
pub use nnar::NnarConfig;

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::eval;
use crate::series::{MonthKey, MonthlySeries};
use crate::stats::Z80;

/// Seasonal period of monthly data.
pub const PERIOD: usize = 12;

/// Point forecast path with optional 80% bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastResult {
    pub origin: MonthKey,
    pub mean: Vec<f64>,
    pub lower80: Option<Vec<f64>>,
    pub upper80: Option<Vec<f64>>,
    pub model_id: String,
}

impl ForecastResult {
    pub fn horizon(&self) -> usize {
        self.mean.len()
    }

    /// Month of horizon step `h` (1-based).
    pub fn month(&self, h: usize) -> MonthKey {
        self.origin.add(h as i32)
    }

    pub fn months(&self) -> impl Iterator<Item = MonthKey> + '_ {
        (1..=self.horizon()).map(move |h| self.month(h))
    }

    pub fn has_bounds(&self) -> bool {
        self.lower80.is_some() && self.upper80.is_some()
    }

    /// Value at a calendar month, if inside the horizon.
    pub fn at(&self, month: MonthKey) -> Option<f64> {
        let h = month.months_since(self.origin);
        (h >= 1 && h as usize <= self.horizon()).then(|| self.mean[h as usize - 1])
    }

    pub fn bounds_at(&self, month: MonthKey) -> Option<(f64, f64)> {
        let h = month.months_since(self.origin);
        if h < 1 || h as usize > self.horizon() {
            return None;
        }
        let i = h as usize - 1;
        Some((self.lower80.as_ref()?[i], self.upper80.as_ref()?[i]))
    }

    /// Builds a result from an unclamped mean and optional per-step Gaussian
    /// standard deviations; paths are clamped at zero.
    pub fn from_sd(origin: MonthKey, model_id: &str, mean: Vec<f64>, sd: Option<Vec<f64>>) -> Result<Self> {
        let bounds = sd.map_or(Bounds::None, Bounds::StdDev);
        Self::from_raw(origin, model_id, RawForecast { mean, bounds, residuals: Vec::new() })
    }

    /// Builds a result from raw (unclamped) paths; bounds come from a
    /// per-step standard deviation when supplied.
    fn from_raw(origin: MonthKey, model_id: &str, raw: RawForecast) -> Result<Self> {
        if raw.mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonConvergence { family: model_id.into(), diagnostics: "non-finite forecast".into() });
        }
        let clamp = |v: Vec<f64>| v.into_iter().map(|x| x.max(0.0)).collect::<Vec<_>>();
        let (lower, upper) = match raw.bounds {
            Bounds::None => (None, None),
            Bounds::StdDev(sd) => {
                let lo = raw.mean.iter().zip(&sd).map(|(m, s)| m - Z80 * s).collect();
                let hi = raw.mean.iter().zip(&sd).map(|(m, s)| m + Z80 * s).collect();
                (Some(lo), Some(hi))
            }
            Bounds::Explicit(lo, hi) => (Some(lo), Some(hi)),
        };
        Ok(Self {
            origin,
            mean: clamp(raw.mean),
            lower80: lower.map(clamp),
            upper80: upper.map(clamp),
            model_id: model_id.to_string(),
        })
    }
}

#[derive(Debug, Clone)]
enum Bounds {
    None,
    StdDev(Vec<f64>),
    Explicit(Vec<f64>, Vec<f64>),
}

#[derive(Debug, Clone)]
struct RawForecast {
    mean: Vec<f64>,
    bounds: Bounds,
    /// One-step in-sample residuals aligned to the input (NaN where undefined).
    residuals: Vec<f64>,
}

/// Forecast plus the in-sample one-step residuals of the fitted model.
#[derive(Debug, Clone)]
pub struct ModelOutput {
    pub forecast: ForecastResult,
    pub residuals: Vec<f64>,
    /// Unclamped mean path and the per-step forecast standard deviation
    /// implied by the interval, where the family has one.
    pub raw_mean: Vec<f64>,
    pub sd: Option<Vec<f64>>,
}

/// A univariate model family with its hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    SeasonalNaive,
    Drift,
    Arima(ArimaConfig),
    Ses,
    Holt,
    HoltWinters,
    /// Automatic choice among SES, Holt and additive Holt-Winters by AICc.
    Ets,
    Stl(SeasonalVariant),
    /// Box-Cox transform + additive Holt-Winters (TBATS stand-in).
    Bchw,
    Nnar(NnarConfig),
}

impl ModelSpec {
    pub fn id(&self) -> &'static str {
        match self {
            ModelSpec::SeasonalNaive => "snaive",
            ModelSpec::Drift => "drift",
            ModelSpec::Arima(_) => "arima",
            ModelSpec::Ses => "ses",
            ModelSpec::Holt => "holt",
            ModelSpec::HoltWinters => "hw",
            ModelSpec::Ets => "ets",
            ModelSpec::Stl(SeasonalVariant::A) => "stl_a",
            ModelSpec::Stl(SeasonalVariant::B) => "stl_b",
            ModelSpec::Stl(SeasonalVariant::C) => "stl_c",
            ModelSpec::Bchw => "bchw",
            ModelSpec::Nnar(_) => "nnar",
        }
    }

    /// Minimum series length the family accepts.
    pub fn min_length(&self) -> usize {
        match self {
            ModelSpec::SeasonalNaive
            | ModelSpec::HoltWinters
            | ModelSpec::Bchw
            | ModelSpec::Stl(SeasonalVariant::B) => 2 * PERIOD,
            ModelSpec::Stl(_) => 3 * PERIOD,
            ModelSpec::Nnar(cfg) => cfg.lags().last().copied().unwrap_or(0) + 2 * PERIOD,
            ModelSpec::Arima(_) | ModelSpec::Ets => 2 * PERIOD,
            ModelSpec::Drift | ModelSpec::Ses | ModelSpec::Holt => 3,
        }
    }

    pub fn produces_intervals(&self) -> bool {
        !matches!(self, ModelSpec::Nnar(_))
    }

    /// The default univariate zoo, in table order.
    pub fn default_zoo() -> Vec<ModelSpec> {
        vec![
            ModelSpec::SeasonalNaive,
            ModelSpec::Drift,
            ModelSpec::Arima(ArimaConfig::default()),
            ModelSpec::Ses,
            ModelSpec::Holt,
            ModelSpec::HoltWinters,
            ModelSpec::Stl(SeasonalVariant::A),
            ModelSpec::Stl(SeasonalVariant::B),
            ModelSpec::Stl(SeasonalVariant::C),
            ModelSpec::Bchw,
            ModelSpec::Nnar(NnarConfig::default()),
        ]
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for ModelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "snaive" | "seasonal_naive" => ModelSpec::SeasonalNaive,
            "drift" => ModelSpec::Drift,
            "arima" => ModelSpec::Arima(ArimaConfig::default()),
            "ses" => ModelSpec::Ses,
            "holt" => ModelSpec::Holt,
            "hw" | "holt_winters" => ModelSpec::HoltWinters,
            "ets" => ModelSpec::Ets,
            "stl_a" => ModelSpec::Stl(SeasonalVariant::A),
            "stl_b" => ModelSpec::Stl(SeasonalVariant::B),
            "stl_c" => ModelSpec::Stl(SeasonalVariant::C),
            "bchw" | "tbats" => ModelSpec::Bchw,
            "nnar" => ModelSpec::Nnar(NnarConfig::default()),
            other => return Err(Error::InvalidSpec(format!("unknown model family `{other}`"))),
        })
    }
}

/// Fits `spec` to a complete series and forecasts `horizon` months ahead.
pub fn fit_forecast<R: Rng + ?Sized>(
    series: &MonthlySeries,
    spec: &ModelSpec,
    horizon: usize,
    rng: &mut R,
) -> Result<ForecastResult> {
    fit_forecast_detailed(series, spec, horizon, rng).map(|o| o.forecast)
}

/// As [`fit_forecast`], also returning the in-sample one-step residuals.
pub fn fit_forecast_detailed<R: Rng + ?Sized>(
    series: &MonthlySeries,
    spec: &ModelSpec,
    horizon: usize,
    rng: &mut R,
) -> Result<ModelOutput> {
    if horizon == 0 {
        return Err(Error::InvalidSpec("horizon must be at least 1".into()));
    }
    let y = series.dense()?;
    if y.len() < spec.min_length() {
        return Err(Error::SeriesTooShort { family: spec.id().into(), required: spec.min_length(), actual: y.len() });
    }
    let raw = match spec {
        ModelSpec::SeasonalNaive => naive::seasonal_naive(&y, horizon, PERIOD),
        ModelSpec::Drift => naive::drift(&y, horizon),
        ModelSpec::Arima(cfg) => {
            let fit = auto_arima(&y, cfg)?;
            fit.raw_forecast(horizon)
        }
        ModelSpec::Ses => ets::fit(&y, EtsKind::Simple)?.raw_forecast(horizon),
        ModelSpec::Holt => ets::fit(&y, EtsKind::Holt)?.raw_forecast(horizon),
        ModelSpec::HoltWinters => ets::fit(&y, EtsKind::HoltWinters)?.raw_forecast(horizon),
        ModelSpec::Ets => ets::fit_auto(&y)?.raw_forecast(horizon),
        ModelSpec::Stl(variant) => stl::forecast(&y, series.start(), *variant, horizon)?,
        ModelSpec::Bchw => bchw::forecast(&y, horizon)?,
        ModelSpec::Nnar(cfg) => nnar::forecast(&y, cfg, horizon, rng)?,
    };
    let residuals = raw.residuals.clone();
    let raw_mean = raw.mean.clone();
    let sd = match &raw.bounds {
        Bounds::None => None,
        Bounds::StdDev(sd) => Some(sd.clone()),
        Bounds::Explicit(lo, hi) => Some(lo.iter().zip(hi).map(|(l, h)| (h - l) / (2.0 * Z80)).collect()),
    };
    let forecast = ForecastResult::from_raw(series.end(), spec.id(), raw)?;
    Ok(ModelOutput { forecast, residuals, raw_mean, sd })
}

/// One row of the validation table. Fit failures are kept, not propagated.
#[derive(Debug, Clone)]
pub struct ValidationRow {
    pub model_id: String,
    pub metrics: std::result::Result<ValidationMetrics, Error>,
    pub forecast: Option<ForecastResult>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationMetrics {
    pub rmse: f64,
    pub mape: f64,
    pub mase: f64,
}

/// Scores an existing forecast against a validation block.
pub fn score_forecast(
    train: &MonthlySeries,
    validation: &MonthlySeries,
    forecast: &ForecastResult,
) -> Result<ValidationMetrics> {
    let actual = validation.dense()?;
    let insample = train.dense()?;
    let pred: Vec<f64> = (0..actual.len())
        .map(|i| forecast.at(validation.month_at(i)).ok_or_else(|| Error::MissingMonth(validation.month_at(i).to_string())))
        .collect::<Result<_>>()?;
    Ok(ValidationMetrics {
        rmse: eval::rmse(&pred, &actual)?,
        mape: eval::mape(&pred, &actual)?.value,
        mase: eval::mase(&pred, &actual, &insample, PERIOD)?,
    })
}

/// Fits every spec on `train`, forecasts across `validation` and scores it.
pub fn validate_models(
    train: &MonthlySeries,
    validation: &MonthlySeries,
    specs: &[ModelSpec],
    seed: u64,
) -> Result<Vec<ValidationRow>> {
    use rand::SeedableRng;
    if validation.is_empty() {
        return Err(Error::EmptySeries);
    }
    let horizon = validation.end().months_since(train.end()) as usize;
    Ok(specs
        .iter()
        .map(|spec| {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let fc = fit_forecast(train, spec, horizon, &mut rng);
            let metrics = fc.as_ref().map_err(Clone::clone).and_then(|f| score_forecast(train, validation, f));
            ValidationRow { model_id: spec.id().to_string(), metrics, forecast: fc.ok() }
        })
        .collect())
}
