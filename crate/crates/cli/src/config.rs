//! TOML pipeline configuration.
//!
//! Relative data paths resolve against the directory holding the config
//! file. Months are written `YYYY-MM`. Every section except `[data]` and
//! `[hierarchy]` has defaults matching the reference setup.

use std::path::{Path, PathBuf};

use rise_core::combine::{CombinationMethod, CombinationSpec};
use rise_core::eval::ReportOptions;
use rise_core::hierarchy::{HierarchicalMethod, Hierarchy};
use rise_core::models::{ModelSpec, NnarConfig};
use rise_core::recovery::{SeasonalMode, Timeline};
use rise_core::signals::ReferenceConfig;
use rise_core::{MonthKey, SplitSpec};
use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    config_version: u32,
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_output")]
    output_dir: String,
    data: RawData,
    hierarchy: RawHierarchy,
    #[serde(default)]
    split: RawSplit,
    #[serde(default)]
    base: RawBase,
    #[serde(default)]
    combination: RawCombination,
    #[serde(default)]
    reference: RawReference,
    #[serde(default)]
    recovery: RawRecovery,
    #[serde(default)]
    evaluate: RawEvaluate,
}

fn default_output() -> String {
    "output".into()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawData {
    arrivals: String,
    keywords: Option<String>,
    flights: Option<String>,
    scores: Option<String>,
    actuals: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawHierarchy {
    root: String,
    region: Vec<RawRegion>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRegion {
    name: String,
    members: Vec<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawSplit {
    train_end: String,
    validation_end: String,
    horizon: usize,
    relabel_months: i32,
}

impl Default for RawSplit {
    fn default() -> Self {
        Self { train_end: "2017-12".into(), validation_end: "2019-12".into(), horizon: 24, relabel_months: 36 }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawBase {
    models: Vec<String>,
    hierarchical: Vec<String>,
    nnar: RawNnar,
}

impl Default for RawBase {
    fn default() -> Self {
        Self {
            models: ModelSpec::default_zoo().iter().map(|m| m.id().to_string()).collect(),
            hierarchical: HierarchicalMethod::ALL.iter().map(|m| m.id().to_string()).collect(),
            nnar: RawNnar::default(),
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawNnar {
    p: Option<usize>,
    seasonal_p: Option<usize>,
    hidden: Option<usize>,
    restarts: Option<usize>,
    epochs: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawCombination {
    method: String,
    lambda: f64,
    keep_fraction: f64,
}

impl Default for RawCombination {
    fn default() -> Self {
        let d = CombinationSpec::default();
        Self { method: d.method.id().into(), lambda: d.lambda, keep_fraction: d.keep_fraction }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawReference {
    threshold: f64,
    lag: usize,
}

impl Default for RawReference {
    fn default() -> Self {
        let d = ReferenceConfig::default();
        Self { threshold: d.threshold, lag: d.lag }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawRecovery {
    history_start: String,
    initial: String,
    terminal: String,
    logistic_months: Vec<String>,
    terminal_weight: f64,
    seasonal: String,
    coefficient: String,
    fixed_r: Option<f64>,
}

impl Default for RawRecovery {
    fn default() -> Self {
        let t = Timeline::default();
        Self {
            history_start: t.history_start.to_string(),
            initial: t.initial.to_string(),
            terminal: t.terminal.to_string(),
            logistic_months: t.logistic_months.iter().map(ToString::to_string).collect(),
            terminal_weight: t.terminal_weight,
            seasonal: SeasonalMode::default().id().into(),
            coefficient: "table".into(),
            fixed_r: None,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawEvaluate {
    start: String,
    end: String,
    alpha: f64,
    season: usize,
    benchmarks: Vec<String>,
}

impl Default for RawEvaluate {
    fn default() -> Self {
        let d = ReportOptions::default();
        Self {
            start: "2023-08".into(),
            end: "2024-07".into(),
            alpha: d.alpha,
            season: d.season,
            benchmarks: vec!["snaive".into(), "arima".into(), "ets".into()],
        }
    }
}

/// Input file locations, already resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct DataPaths {
    pub arrivals: PathBuf,
    pub keywords: Option<PathBuf>,
    pub flights: Option<PathBuf>,
    pub scores: Option<PathBuf>,
    pub actuals: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSettings {
    pub spec: SplitSpec,
    /// Months forecast from the end of validation.
    pub horizon: usize,
    /// Shift applied to refit forecasts so they cover the post-break window.
    pub relabel_months: i32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CoefficientMode {
    /// The `r` column of the scores file.
    Table,
    /// `r` from the linear score formula.
    Formula,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoverySettings {
    pub timeline: Timeline,
    pub seasonal: SeasonalMode,
    pub coefficient: CoefficientMode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluateSettings {
    pub start: MonthKey,
    pub end: MonthKey,
    pub options: ReportOptions,
    /// Models fitted to the full observed history and scored alongside the
    /// pipeline.
    pub benchmarks: Vec<ModelSpec>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub config_version: u32,
    /// SHA-256 of the config text, hex encoded.
    pub config_hash: String,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub data: DataPaths,
    pub hierarchy: Hierarchy,
    pub split: SplitSettings,
    pub models: Vec<ModelSpec>,
    pub hierarchical: Vec<HierarchicalMethod>,
    pub combination: CombinationSpec,
    pub reference: ReferenceConfig,
    pub recovery: RecoverySettings,
    pub evaluate: EvaluateSettings,
}

fn config_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

fn month(field: &str, s: &str) -> Result<MonthKey> {
    s.parse().map_err(|e| CliError::Config(format!("{field}: {e}")))
}

impl PipelineConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    /// Parses config text; relative paths resolve against `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(config_err)?;
        if raw.config_version != CONFIG_VERSION {
            return Err(CliError::Config(format!(
                "config_version {} is not supported (expected {CONFIG_VERSION})",
                raw.config_version
            )));
        }
        let resolve = |p: &str| base_dir.join(p);
        let data = DataPaths {
            arrivals: resolve(&raw.data.arrivals),
            keywords: raw.data.keywords.as_deref().map(resolve),
            flights: raw.data.flights.as_deref().map(resolve),
            scores: raw.data.scores.as_deref().map(resolve),
            actuals: raw.data.actuals.as_deref().map(resolve),
        };

        let regions: Vec<(String, Vec<String>)> =
            raw.hierarchy.region.into_iter().map(|r| (r.name, r.members)).collect();
        let hierarchy = Hierarchy::new(&raw.hierarchy.root, &regions).map_err(config_err)?;

        let spec = SplitSpec::new(month("split.train_end", &raw.split.train_end)?, month("split.validation_end", &raw.split.validation_end)?)
            .map_err(config_err)?;
        if raw.split.horizon == 0 {
            return Err(CliError::Config("split.horizon must be at least 1".into()));
        }
        let split = SplitSettings { spec, horizon: raw.split.horizon, relabel_months: raw.split.relabel_months };

        let mut nnar = NnarConfig::default();
        let n = &raw.base.nnar;
        nnar.p = n.p.unwrap_or(nnar.p);
        nnar.seasonal_p = n.seasonal_p.unwrap_or(nnar.seasonal_p);
        nnar.hidden = n.hidden.unwrap_or(nnar.hidden);
        nnar.restarts = n.restarts.unwrap_or(nnar.restarts);
        nnar.epochs = n.epochs.unwrap_or(nnar.epochs);
        if nnar.hidden == 0 || nnar.restarts == 0 || nnar.lags().is_empty() {
            return Err(CliError::Config("base.nnar needs at least one lag, hidden unit and restart".into()));
        }
        let models = raw
            .base
            .models
            .iter()
            .map(|id| {
                id.parse::<ModelSpec>().map(|m| match m {
                    ModelSpec::Nnar(_) => ModelSpec::Nnar(nnar.clone()),
                    other => other,
                })
            })
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(config_err)?;
        let hierarchical = raw
            .base
            .hierarchical
            .iter()
            .map(|id| id.parse::<HierarchicalMethod>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(config_err)?;
        if models.is_empty() && hierarchical.is_empty() {
            return Err(CliError::Config("base: no models configured".into()));
        }
        for (i, m) in models.iter().enumerate() {
            if models[..i].iter().any(|o| o.id() == m.id()) {
                return Err(CliError::Config(format!("base.models lists `{}` twice", m.id())));
            }
        }

        let method: CombinationMethod = raw.combination.method.parse().map_err(config_err)?;
        let c = &raw.combination;
        if !(c.lambda >= 0.0) || !(c.keep_fraction > 0.0 && c.keep_fraction <= 1.0) {
            return Err(CliError::Config("combination: lambda must be >= 0 and keep_fraction in (0, 1]".into()));
        }
        let combination = CombinationSpec { method, lambda: c.lambda, keep_fraction: c.keep_fraction };

        if !(0.0..=1.0).contains(&raw.reference.threshold) {
            return Err(CliError::Config("reference.threshold must lie in [0, 1]".into()));
        }
        let reference = ReferenceConfig { threshold: raw.reference.threshold, lag: raw.reference.lag };

        let r = &raw.recovery;
        let timeline = Timeline {
            history_start: month("recovery.history_start", &r.history_start)?,
            initial: month("recovery.initial", &r.initial)?,
            terminal: month("recovery.terminal", &r.terminal)?,
            logistic_months: r
                .logistic_months
                .iter()
                .map(|m| month("recovery.logistic_months", m))
                .collect::<Result<_>>()?,
            terminal_weight: r.terminal_weight,
        };
        timeline.validate().map_err(config_err)?;
        let seasonal: SeasonalMode = r.seasonal.parse().map_err(config_err)?;
        let coefficient = match (r.coefficient.as_str(), r.fixed_r) {
            ("table", _) => CoefficientMode::Table,
            ("formula", _) => CoefficientMode::Formula,
            ("fixed", Some(v)) if v > 0.0 && v <= 1.0 => CoefficientMode::Fixed(v),
            ("fixed", _) => return Err(CliError::Config("recovery.coefficient = \"fixed\" needs fixed_r in (0, 1]".into())),
            (other, _) => return Err(CliError::Config(format!("unknown recovery.coefficient `{other}`"))),
        };
        if matches!(coefficient, CoefficientMode::Table | CoefficientMode::Formula) && data.scores.is_none() {
            return Err(CliError::Config(format!("recovery.coefficient = \"{}\" needs data.scores", r.coefficient)));
        }
        let recovery = RecoverySettings { timeline, seasonal, coefficient };

        let e = &raw.evaluate;
        let evaluate = EvaluateSettings {
            start: month("evaluate.start", &e.start)?,
            end: month("evaluate.end", &e.end)?,
            options: ReportOptions { season: e.season, alpha: e.alpha },
            benchmarks: e
                .benchmarks
                .iter()
                .map(|id| id.parse::<ModelSpec>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(config_err)?,
        };
        if evaluate.end < evaluate.start || !(e.alpha > 0.0 && e.alpha < 1.0) || e.season == 0 {
            return Err(CliError::Config("evaluate: need start <= end, alpha in (0, 1) and season >= 1".into()));
        }

        Ok(Self {
            config_version: raw.config_version,
            config_hash: hex::encode(Sha256::digest(text.as_bytes())),
            seed: raw.seed,
            output_dir: resolve(&raw.output_dir),
            data,
            hierarchy,
            split,
            models,
            hierarchical,
            combination,
            reference,
            recovery,
            evaluate,
        })
    }

    /// Months the refit base forecasts cover after relabelling.
    pub fn base_window(&self) -> (MonthKey, MonthKey) {
        let first = self.split.spec.validation_end.add(1 + self.split.relabel_months);
        (first, first.add(self.split.horizon as i32 - 1))
    }
}
