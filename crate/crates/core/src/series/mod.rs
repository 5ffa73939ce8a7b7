//! Calendar-indexed monthly series, train/validation splitting, imputation
//! and long-format CSV ingestion.

mod csv_io;
mod impute;
mod month;

pub use csv_io::{load_csv, read_csv, write_csv, ObservationKind, Schema};
pub use impute::{impute, LocalLinearTrend};
pub use month::MonthKey;

use crate::error::{Error, Result};

/// A contiguous run of monthly observations, some of which may be missing.
#[derive(Debug, Clone, PartialEq)]
pub struct MonthlySeries {
    name: String,
    start: MonthKey,
    values: Vec<Option<f64>>,
}

impl MonthlySeries {
    pub fn new(name: impl Into<String>, start: MonthKey, values: Vec<Option<f64>>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptySeries);
        }
        for (index, v) in values.iter().enumerate() {
            if let Some(v) = *v {
                if !(v >= 0.0) || !v.is_finite() {
                    return Err(Error::NegativeValue { index, value: v });
                }
            }
        }
        Ok(Self { name: name.into(), start, values })
    }

    /// Builds a fully observed series.
    pub fn from_values(name: impl Into<String>, start: MonthKey, values: &[f64]) -> Result<Self> {
        Self::new(name, start, values.iter().map(|&v| Some(v)).collect())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn start(&self) -> MonthKey {
        self.start
    }

    pub fn end(&self) -> MonthKey {
        self.start.add(self.values.len() as i32 - 1)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[Option<f64>] {
        &self.values
    }

    pub fn month_at(&self, index: usize) -> MonthKey {
        self.start.add(index as i32)
    }

    pub fn index_of(&self, month: MonthKey) -> Option<usize> {
        let offset = month.months_since(self.start);
        (offset >= 0 && (offset as usize) < self.values.len()).then_some(offset as usize)
    }

    pub fn get(&self, month: MonthKey) -> Option<f64> {
        self.index_of(month).and_then(|i| self.values[i])
    }

    pub fn observed_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_some()).count()
    }

    pub fn is_complete(&self) -> bool {
        self.values.iter().all(Option::is_some)
    }

    /// The values of a complete series; fails if any month is missing.
    pub fn dense(&self) -> Result<Vec<f64>> {
        self.values.iter().map(|v| v.ok_or(Error::MissingValues)).collect()
    }

    /// Last month that carries an observation.
    pub fn last_observed(&self) -> Option<MonthKey> {
        self.values.iter().rposition(Option::is_some).map(|i| self.month_at(i))
    }

    /// Inclusive sub-range `[from, to]`.
    pub fn slice(&self, from: MonthKey, to: MonthKey) -> Result<Self> {
        let (a, b) = match (self.index_of(from), self.index_of(to)) {
            (Some(a), Some(b)) if a <= b => (a, b),
            _ => {
                return Err(Error::OutOfRange(format!(
                    "{from}..{to} not within {}..{}",
                    self.start,
                    self.end()
                )))
            }
        };
        Ok(Self {
            name: self.name.clone(),
            start: from,
            values: self.values[a..=b].to_vec(),
        })
    }

    /// Prefix through `to` inclusive.
    pub fn through(&self, to: MonthKey) -> Result<Self> {
        self.slice(self.start, to)
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }
}

/// Train/validation boundary pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitSpec {
    pub train_end: MonthKey,
    pub validation_end: MonthKey,
}

impl SplitSpec {
    pub fn new(train_end: MonthKey, validation_end: MonthKey) -> Result<Self> {
        if train_end >= validation_end {
            return Err(Error::OutOfRange(format!(
                "train_end {train_end} must precede validation_end {validation_end}"
            )));
        }
        Ok(Self { train_end, validation_end })
    }
}

/// Splits `series` into a training prefix ending at `train_end` and the
/// validation block `(train_end, validation_end]`.
pub fn split(series: &MonthlySeries, spec: &SplitSpec) -> Result<(MonthlySeries, MonthlySeries)> {
    if spec.train_end >= spec.validation_end {
        return Err(Error::OutOfRange("empty validation window".into()));
    }
    let train = series.through(spec.train_end)?;
    let validation = series.slice(spec.train_end.succ(), spec.validation_end)?;
    Ok((train, validation))
}
