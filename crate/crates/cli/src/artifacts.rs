//! CSV artifacts exchanged between stages.
//!
//! Every stage reads its upstream inputs from these files, so a single stage
//! can be rerun against cached outputs. Floats are written in shortest
//! round-trip form and parse back to the same bits.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const VALIDATION_METRICS: &str = "validation_metrics.csv";
pub const MODEL_SCREENING: &str = "model_screening.csv";
pub const WEIGHTS: &str = "weights.csv";
pub const BASE_FORECASTS: &str = "base_forecasts.csv";
pub const KEYWORDS_SELECTED: &str = "keywords_selected.csv";
pub const REFERENCE_FORECASTS: &str = "reference_forecasts.csv";
pub const COEFFICIENTS: &str = "coefficients.csv";
pub const RECOVERY_CURVES: &str = "recovery_curves.csv";
pub const POINT_FORECASTS: &str = "point_forecasts.csv";
pub const INTERVAL_FORECASTS: &str = "interval_forecasts.csv";
pub const POINT_METRICS: &str = "point_metrics.csv";
pub const INTERVAL_METRICS: &str = "interval_metrics.csv";
pub const BENCHMARK_METRICS: &str = "benchmark_metrics.csv";
pub const SUMMARY: &str = "summary.md";
pub const MANIFEST: &str = "run_manifest.json";

/// Model id of the combined base forecast.
pub const COMBINED: &str = "combined";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationRecord {
    pub destination: String,
    pub model: String,
    /// `univariate`, `hierarchical` or `combination`.
    pub kind: String,
    pub rmse: Option<f64>,
    pub mape: Option<f64>,
    pub mase: Option<f64>,
    pub retained: bool,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreeningRecord {
    pub model: String,
    pub mean_mape: Option<f64>,
    pub destinations_ok: usize,
    pub retained: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightRecord {
    pub destination: String,
    pub method: String,
    pub model: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseRecord {
    pub destination: String,
    pub model: String,
    pub retained: bool,
    pub year: i32,
    pub month: u32,
    pub mean: f64,
    pub lower80: Option<f64>,
    pub upper80: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeywordRecord {
    pub destination: String,
    pub keyword: String,
    pub correlation: f64,
    pub included: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceRecord {
    pub destination: String,
    pub year: i32,
    pub month: u32,
    pub reference: f64,
    pub index_branch: Option<f64>,
    pub flight_branch: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientRecord {
    pub destination: String,
    pub r: f64,
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRecord {
    pub destination: String,
    pub year: i32,
    pub month: u32,
    pub step: usize,
    pub linear: f64,
    pub quadratic: f64,
    pub logistic: f64,
    pub trend: f64,
    pub seasonal: f64,
    pub point: f64,
    pub lower80: Option<f64>,
    pub upper80: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointRecord {
    pub destination: String,
    pub year: i32,
    pub month: u32,
    pub point: f64,
    /// `reference` or `curve`.
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalRecord {
    pub destination: String,
    pub year: i32,
    pub month: u32,
    pub lower80: f64,
    pub upper80: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub destination: String,
    pub rmse: f64,
    pub mape: f64,
    pub mase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalMetricRecord {
    pub destination: String,
    pub winkler: f64,
    pub standard_winkler: f64,
    pub coverage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRecord {
    pub destination: String,
    pub model: String,
    pub rmse: f64,
    pub mape: f64,
    pub mase: f64,
}

pub fn write<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let err = |e: csv::Error| CliError::Io { path: path.to_path_buf(), message: e.to_string() };
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    for row in rows {
        w.serialize(row).map_err(err)?;
    }
    w.flush().map_err(CliError::io(path))
}

pub fn read<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let err = |e: csv::Error| CliError::Io { path: path.to_path_buf(), message: e.to_string() };
    let mut r = csv::Reader::from_path(path).map_err(err)?;
    r.deserialize().map(|row| row.map_err(err)).collect()
}
