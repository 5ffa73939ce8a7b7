//! Calendar-month seasonal factors for the recovery curve, estimated from
//! pre-break history.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::models::{decompose, DecompositionMode, PERIOD};
use crate::series::{MonthKey, MonthlySeries};
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SeasonalMode {
    /// Multiplicative decomposition of `ln y`; the factors `S'` are mapped
    /// back to the original scale as `exp(mean(T') (S' - 1))`.
    #[default]
    LogRescaled,
    /// The factors of the log-series decomposition used as they are.
    LogLiteral,
    /// Multiplicative decomposition of `y` itself.
    Raw,
    /// No seasonality.
    Flat,
}

impl SeasonalMode {
    pub fn id(&self) -> &'static str {
        match self {
            SeasonalMode::LogRescaled => "log_rescaled",
            SeasonalMode::LogLiteral => "log_literal",
            SeasonalMode::Raw => "raw",
            SeasonalMode::Flat => "flat",
        }
    }
}

impl fmt::Display for SeasonalMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for SeasonalMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "log_rescaled" => SeasonalMode::LogRescaled,
            "log_literal" => SeasonalMode::LogLiteral,
            "raw" => SeasonalMode::Raw,
            "flat" => SeasonalMode::Flat,
            other => return Err(Error::InvalidSpec(format!("unknown seasonal mode `{other}`"))),
        })
    }
}

/// Twelve positive factors with mean one, January first.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeasonalProfile {
    factors: [f64; 12],
}

impl SeasonalProfile {
    pub fn flat() -> Self {
        Self { factors: [1.0; 12] }
    }

    pub fn from_factors(factors: [f64; 12]) -> Result<Self> {
        if factors.iter().any(|f| !(*f > 0.0) || !f.is_finite()) {
            return Err(Error::InvalidSpec("seasonal factors must be positive".into()));
        }
        Ok(Self { factors })
    }

    pub fn factors(&self) -> &[f64; 12] {
        &self.factors
    }

    pub fn factor(&self, month: MonthKey) -> f64 {
        self.factors[month.month() as usize - 1]
    }

    /// Estimates the profile from a complete history (typically the years
    /// before the break).
    pub fn from_history(history: &MonthlySeries, mode: SeasonalMode) -> Result<Self> {
        if mode == SeasonalMode::Flat {
            return Ok(Self::flat());
        }
        let y = history.dense()?;
        let raw = match mode {
            SeasonalMode::Raw => decompose(&y, history.start(), DecompositionMode::Multiplicative)?.seasonal_index(),
            _ => {
                // The log series must stay positive for a multiplicative split.
                if let Some(i) = y.iter().position(|v| *v <= 1.0) {
                    return Err(Error::NonPositiveValue(i));
                }
                let logs: Vec<f64> = y.iter().map(|v| v.ln()).collect();
                let dec = decompose(&logs, history.start(), DecompositionMode::Multiplicative)?;
                let index = dec.seasonal_index();
                if mode == SeasonalMode::LogLiteral {
                    index
                } else {
                    let level = stats::mean(&dec.trend);
                    index.map(|s| (level * (s - 1.0)).exp())
                }
            }
        };
        let mean = raw.iter().sum::<f64>() / PERIOD as f64;
        Self::from_factors(raw.map(|f| f / mean))
    }
}
