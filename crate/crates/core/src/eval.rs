//! Point and interval forecast accuracy measures and per-destination reports.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::stats;

/// Default significance of the evaluated intervals (80% nominal coverage).
pub const ALPHA: f64 = 0.2;

fn check_len(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(Error::NoOverlap);
    }
    Ok(())
}

pub fn rmse(forecast: &[f64], actual: &[f64]) -> Result<f64> {
    check_len(forecast, actual)?;
    let sse: f64 = forecast.iter().zip(actual).map(|(f, a)| (f - a).powi(2)).sum();
    Ok((sse / actual.len() as f64).sqrt())
}

/// Mean absolute percentage error as a fraction, with the number of
/// zero-actual months left out.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mape {
    pub value: f64,
    pub skipped: usize,
}

/// `(forecast - actual) / actual` per month; `None` where the actual is zero.
pub fn percentage_errors(forecast: &[f64], actual: &[f64]) -> Result<Vec<Option<f64>>> {
    check_len(forecast, actual)?;
    Ok(forecast
        .iter()
        .zip(actual)
        .map(|(f, a)| if *a == 0.0 { None } else { Some((f - a) / a) })
        .collect())
}

pub fn mape(forecast: &[f64], actual: &[f64]) -> Result<Mape> {
    let pe = percentage_errors(forecast, actual)?;
    let used: Vec<f64> = pe.iter().flatten().map(|e| e.abs()).collect();
    if used.is_empty() {
        return Err(Error::NoOverlap);
    }
    Ok(Mape { value: stats::mean(&used), skipped: pe.len() - used.len() })
}

/// Mean absolute error scaled by the in-sample one-step naive MAE at `season`
/// (12 for the seasonal convention, 1 for the non-seasonal one).
pub fn mase(forecast: &[f64], actual: &[f64], insample: &[f64], season: usize) -> Result<f64> {
    check_len(forecast, actual)?;
    if season == 0 || insample.len() <= season {
        return Err(Error::InsufficientHistory { required: season + 1, actual: insample.len() });
    }
    let scale = insample.windows(season + 1).map(|w| (w[season] - w[0]).abs()).sum::<f64>()
        / (insample.len() - season) as f64;
    if !(scale > 0.0) {
        return Err(Error::ZeroScale);
    }
    let mae = forecast.iter().zip(actual).map(|(f, a)| (f - a).abs()).sum::<f64>() / actual.len() as f64;
    Ok(mae / scale)
}

fn check_interval(lower: &[f64], upper: &[f64], actual: &[f64]) -> Result<()> {
    check_len(lower, upper)?;
    check_len(lower, actual)?;
    match lower.iter().zip(upper).position(|(l, u)| !(l <= u)) {
        Some(t) => Err(Error::BadInterval(t)),
        None => Ok(()),
    }
}

/// Mean Winkler score of `100(1 - alpha)%` intervals.
pub fn winkler(lower: &[f64], upper: &[f64], actual: &[f64], alpha: f64) -> Result<f64> {
    check_interval(lower, upper, actual)?;
    let penalty = 2.0 / alpha;
    let total: f64 = lower
        .iter()
        .zip(upper)
        .zip(actual)
        .map(|((l, u), y)| {
            let width = u - l;
            if y < l {
                width + penalty * (l - y)
            } else if y > u {
                width + penalty * (y - u)
            } else {
                width
            }
        })
        .sum();
    Ok(total / actual.len() as f64)
}

/// Winkler score divided by the mean actual.
pub fn standard_winkler(winkler: f64, actuals: &[f64]) -> Result<f64> {
    if actuals.is_empty() {
        return Err(Error::NoOverlap);
    }
    let mean = stats::mean(actuals);
    if !(mean > 0.0) {
        return Err(Error::ZeroMeanActual);
    }
    Ok(winkler / mean)
}

/// Fraction of actuals inside `[lower, upper]`, boundaries included.
pub fn coverage(lower: &[f64], upper: &[f64], actual: &[f64]) -> Result<f64> {
    check_len(lower, upper)?;
    check_len(lower, actual)?;
    let hits = lower.iter().zip(upper).zip(actual).filter(|((l, u), y)| *l <= *y && *y <= *u).count();
    Ok(hits as f64 / actual.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub destination: String,
    pub rmse: f64,
    pub mape: f64,
    pub mase: f64,
    /// Per-month percentage errors; empty on footer rows.
    pub percentage_error: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntervalMetricRow {
    pub destination: String,
    pub winkler: f64,
    pub standard_winkler: f64,
    pub coverage: f64,
}

/// Inputs for one destination over the evaluation window.
#[derive(Debug, Clone)]
pub struct DestinationPaths {
    pub destination: String,
    pub actual: Vec<f64>,
    pub point: Vec<f64>,
    pub interval: Option<(Vec<f64>, Vec<f64>)>,
    /// History used for the MASE scale.
    pub insample: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportOptions {
    pub season: usize,
    pub alpha: f64,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self { season: 12, alpha: ALPHA }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub points: Vec<MetricRow>,
    pub intervals: Vec<IntervalMetricRow>,
    pub point_average: MetricRow,
    pub point_weighted: MetricRow,
    pub interval_average: Option<IntervalMetricRow>,
    pub interval_weighted: Option<IntervalMetricRow>,
    /// Zero-actual months left out of percentage errors, per destination.
    pub skipped: Vec<(String, usize)>,
}

fn weighted(values: &[f64], weights: &[f64]) -> f64 {
    let total: f64 = weights.iter().sum();
    values.iter().zip(weights).map(|(v, w)| v * w).sum::<f64>() / total
}

fn point_footer(label: &str, rows: &[MetricRow], weights: &[f64]) -> MetricRow {
    let pick = |f: fn(&MetricRow) -> f64| rows.iter().map(f).collect::<Vec<_>>();
    MetricRow {
        destination: label.into(),
        rmse: weighted(&pick(|r| r.rmse), weights),
        mape: weighted(&pick(|r| r.mape), weights),
        mase: weighted(&pick(|r| r.mase), weights),
        percentage_error: Vec::new(),
    }
}

fn interval_footer(label: &str, rows: &[IntervalMetricRow], weights: &[f64]) -> IntervalMetricRow {
    let pick = |f: fn(&IntervalMetricRow) -> f64| rows.iter().map(f).collect::<Vec<_>>();
    IntervalMetricRow {
        destination: label.into(),
        winkler: weighted(&pick(|r| r.winkler), weights),
        standard_winkler: weighted(&pick(|r| r.standard_winkler), weights),
        coverage: weighted(&pick(|r| r.coverage), weights),
    }
}

/// Per-destination metric rows plus simple and arrivals-weighted averages.
/// Weights are the mean actual over the evaluation window.
pub fn report(paths: &[DestinationPaths], opts: ReportOptions) -> Result<EvaluationReport> {
    if paths.is_empty() {
        return Err(Error::NoOverlap);
    }
    let mut points = Vec::with_capacity(paths.len());
    let mut intervals = Vec::new();
    let mut weights = Vec::with_capacity(paths.len());
    let mut interval_weights = Vec::new();
    let mut skipped = Vec::new();
    for p in paths {
        let m = mape(&p.point, &p.actual)?;
        if m.skipped > 0 {
            skipped.push((p.destination.clone(), m.skipped));
        }
        points.push(MetricRow {
            destination: p.destination.clone(),
            rmse: rmse(&p.point, &p.actual)?,
            mape: m.value,
            mase: mase(&p.point, &p.actual, &p.insample, opts.season)?,
            percentage_error: percentage_errors(&p.point, &p.actual)?,
        });
        let weight = stats::mean(&p.actual);
        weights.push(weight);
        if let Some((lo, hi)) = &p.interval {
            let w = winkler(lo, hi, &p.actual, opts.alpha)?;
            intervals.push(IntervalMetricRow {
                destination: p.destination.clone(),
                winkler: w,
                standard_winkler: standard_winkler(w, &p.actual)?,
                coverage: coverage(lo, hi, &p.actual)?,
            });
            interval_weights.push(weight);
        }
    }
    if !(weights.iter().sum::<f64>() > 0.0) {
        return Err(Error::ZeroMeanActual);
    }
    let ones = vec![1.0; points.len()];
    let (interval_average, interval_weighted) = if intervals.is_empty() {
        (None, None)
    } else {
        let ones = vec![1.0; intervals.len()];
        (
            Some(interval_footer("Average", &intervals, &ones)),
            Some(interval_footer("Weighted Average", &intervals, &interval_weights)),
        )
    };
    Ok(EvaluationReport {
        point_average: point_footer("Average", &points, &ones),
        point_weighted: point_footer("Weighted Average", &points, &weights),
        points,
        intervals,
        interval_average,
        interval_weighted,
        skipped,
    })
}

impl EvaluationReport {
    /// Point rows followed by the two footer rows.
    pub fn point_table(&self) -> impl Iterator<Item = &MetricRow> {
        self.points.iter().chain([&self.point_average, &self.point_weighted])
    }

    pub fn interval_table(&self) -> impl Iterator<Item = &IntervalMetricRow> {
        self.intervals.iter().chain(self.interval_average.iter()).chain(self.interval_weighted.iter())
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        out.push_str("| Destination | RMSE | MAPE | MASE |\n|---|---:|---:|---:|\n");
        for r in self.point_table() {
            let _ = writeln!(out, "| {} | {:.0} | {:.4} | {:.4} |", r.destination, r.rmse, r.mape, r.mase);
        }
        if !self.intervals.is_empty() {
            out.push_str("\n| Destination | Winkler | Standard Winkler | Coverage |\n|---|---:|---:|---:|\n");
            for r in self.interval_table() {
                let _ = writeln!(
                    out,
                    "| {} | {:.0} | {:.2} | {:.0}% |",
                    r.destination,
                    r.winkler,
                    r.standard_winkler,
                    100.0 * r.coverage
                );
            }
        }
        out
    }
}
