//! Input loading and cross-checks against the configured hierarchy.

use std::collections::BTreeMap;
use std::path::Path;

use rise_core::recovery::DestinationScores;
use rise_core::series::{impute, load_csv, read_csv, Schema};
use rise_core::signals::KeywordSeries;
use rise_core::MonthlySeries;
use serde::Deserialize;

use crate::config::{CoefficientMode, PipelineConfig};
use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRow {
    pub scores: DestinationScores,
    /// Tabulated coefficient, when the file has one.
    pub r: Option<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct Dataset {
    /// Raw arrivals, possibly with gaps.
    pub arrivals: BTreeMap<String, MonthlySeries>,
    pub keywords: BTreeMap<String, Vec<KeywordSeries>>,
    pub flights: BTreeMap<String, MonthlySeries>,
    pub scores: BTreeMap<String, ScoreRow>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Deserialize)]
struct RawScore {
    destination: String,
    policy: u8,
    distance: u8,
    recovery: u8,
    r: Option<f64>,
}

fn read_scores(path: &Path) -> Result<BTreeMap<String, ScoreRow>> {
    let io = |e: csv::Error| CliError::Io { path: path.to_path_buf(), message: e.to_string() };
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path).map_err(io)?;
    let mut out = BTreeMap::new();
    for row in rdr.deserialize::<RawScore>() {
        let row = row.map_err(io)?;
        let scores = DestinationScores::new(row.destination.clone(), row.policy, row.distance, row.recovery)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        out.insert(row.destination, ScoreRow { scores, r: row.r });
    }
    Ok(out)
}

fn load_series(path: &Path, schema: &Schema) -> Result<BTreeMap<String, MonthlySeries>> {
    load_csv(path, schema).map_err(|e| CliError::Io { path: path.to_path_buf(), message: e.to_string() })
}

impl Dataset {
    /// Loads every configured input. A configured keywords or flights file
    /// that does not exist is downgraded to a warning; the affected
    /// reference branch is then skipped for every destination.
    pub fn load(cfg: &PipelineConfig) -> Result<Self> {
        let mut ds = Dataset { arrivals: load_series(&cfg.data.arrivals, &Schema::arrivals())?, ..Default::default() };

        if let Some(path) = &cfg.data.keywords {
            if path.exists() {
                let file = std::fs::File::open(path).map_err(CliError::io(path))?;
                let map = read_csv(file, &Schema::keywords())
                    .map_err(|e| CliError::Io { path: path.clone(), message: e.to_string() })?;
                for (key, series) in map {
                    ds.keywords
                        .entry(key[0].clone())
                        .or_default()
                        .push(KeywordSeries { keyword: key[1].clone(), series });
                }
            } else {
                ds.warnings.push(format!("keywords file {} not found, search-index branch disabled", path.display()));
            }
        }
        if let Some(path) = &cfg.data.flights {
            if path.exists() {
                ds.flights = load_series(path, &Schema::flights())?;
            } else {
                ds.warnings.push(format!("flights file {} not found, flight branch disabled", path.display()));
            }
        }
        if let Some(path) = &cfg.data.scores {
            ds.scores = read_scores(path)?;
        }
        ds.check(cfg)?;
        Ok(ds)
    }

    fn check(&self, cfg: &PipelineConfig) -> Result<()> {
        for leaf in cfg.hierarchy.leaves() {
            if !self.arrivals.contains_key(leaf) {
                return Err(CliError::Config(format!("destination `{leaf}` has no arrivals")));
            }
            match (cfg.recovery.coefficient, self.scores.get(leaf)) {
                (CoefficientMode::Fixed(_), _) => {}
                (_, None) => return Err(CliError::Config(format!("destination `{leaf}` has no scores row"))),
                (CoefficientMode::Table, Some(row)) if row.r.is_none() => {
                    return Err(CliError::Config(format!("destination `{leaf}` has no tabulated r")))
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Gap-filled arrivals for one destination.
    pub fn imputed(&self, destination: &str) -> rise_core::Result<MonthlySeries> {
        let raw = self
            .arrivals
            .get(destination)
            .ok_or_else(|| rise_core::Error::MissingMonth(format!("no arrivals for {destination}")))?;
        impute(raw)
    }
}
