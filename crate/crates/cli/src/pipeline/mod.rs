//! Stage execution: base → reference → recovery → evaluate.
//!
//! Stages run sequentially and communicate only through CSV artifacts in the
//! output directory. Inside a stage, destinations are processed on the rayon
//! pool and written single-threaded in sorted order.

mod base;
mod evaluate;
mod recovery;
mod reference;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use log::info;
use rise_core::{MonthKey, MonthlySeries};

use crate::config::PipelineConfig;
use crate::data::Dataset;
use crate::error::{CliError, Result};
use crate::manifest::RunManifest;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Base,
    Reference,
    Recovery,
    Evaluate,
}

impl Stage {
    pub const ALL: [Stage; 4] = [Stage::Base, Stage::Reference, Stage::Recovery, Stage::Evaluate];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Base => "base",
            Stage::Reference => "reference",
            Stage::Recovery => "recovery",
            Stage::Evaluate => "evaluate",
        }
    }

    fn execute(self, ctx: &Context<'_>) -> Result<StageOutput> {
        match self {
            Stage::Base => base::run(ctx),
            Stage::Reference => reference::run(ctx),
            Stage::Recovery => recovery::run(ctx),
            Stage::Evaluate => evaluate::run(ctx),
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| CliError::Config(format!("unknown stage `{s}` (expected base, reference, recovery or evaluate)")))
    }
}

/// Files written and fallbacks taken by one stage.
#[derive(Debug, Clone, Default)]
pub struct StageOutput {
    pub files: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

pub(crate) struct Context<'a> {
    pub cfg: &'a PipelineConfig,
    pub data: &'a Dataset,
    pub out: &'a Path,
}

impl Context<'_> {
    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    /// Bottom-level destinations in sorted order.
    fn destinations(&self) -> Vec<String> {
        let mut d = self.cfg.hierarchy.leaves().to_vec();
        d.sort();
        d
    }

    fn seed(&self) -> u64 {
        self.cfg.seed
    }
}

/// Runs every stage. Evaluation is skipped, with a warning, when no actuals
/// are configured.
pub fn run(cfg: &PipelineConfig, out: &Path) -> Result<RunManifest> {
    let stages: Vec<Stage> = if cfg.data.actuals.is_some() { Stage::ALL.to_vec() } else { Stage::ALL[..3].to_vec() };
    let mut manifest = run_stages(cfg, out, &stages)?;
    if cfg.data.actuals.is_none() {
        manifest.warnings.push("no actuals configured, evaluate stage skipped".into());
        manifest.write(out)?;
    }
    Ok(manifest)
}

/// Runs the given stages in order, reading upstream artifacts from `out`.
pub fn run_stages(cfg: &PipelineConfig, out: &Path, stages: &[Stage]) -> Result<RunManifest> {
    fs::create_dir_all(out).map_err(CliError::io(out))?;
    let data = Dataset::load(cfg)?;
    let ctx = Context { cfg, data: &data, out };
    let mut manifest = RunManifest::new(cfg);
    manifest.warnings.extend(data.warnings.iter().cloned());
    let mut stages = stages.to_vec();
    stages.sort();
    stages.dedup();
    for stage in stages {
        let t0 = Instant::now();
        info!("stage {stage}: start");
        let output = stage.execute(&ctx)?;
        let seconds = t0.elapsed().as_secs_f64();
        info!("stage {stage}: {} file(s), {} warning(s), {seconds:.2}s", output.files.len(), output.warnings.len());
        manifest.record(stage, seconds, output, out)?;
    }
    manifest.write(out)?;
    Ok(manifest)
}

/// Builds a contiguous series from `(month, value)` pairs.
fn series_from(stage: &'static str, name: &str, points: &[(MonthKey, f64)]) -> Result<MonthlySeries> {
    let artifact = |message: String| CliError::Artifact { stage, message };
    let Some(&(start, _)) = points.first() else {
        return Err(artifact(format!("{name}: no rows")));
    };
    for (i, (m, _)) in points.iter().enumerate() {
        if *m != start.add(i as i32) {
            return Err(artifact(format!("{name}: months are not contiguous at {m}")));
        }
    }
    let values: Vec<f64> = points.iter().map(|p| p.1).collect();
    MonthlySeries::from_values(name, start, &values).map_err(|e| artifact(format!("{name}: {e}")))
}

fn month_of(stage: &'static str, year: i32, month: u32) -> Result<MonthKey> {
    MonthKey::new(year, month).map_err(|e| CliError::Artifact { stage, message: e.to_string() })
}

/// Reads an upstream artifact, naming the stage that should have produced it.
fn upstream<T: serde::de::DeserializeOwned>(ctx: &Context<'_>, stage: &'static str, file: &str, producer: Stage) -> Result<Vec<T>> {
    let path = ctx.path(file);
    if !path.exists() {
        return Err(CliError::Artifact {
            stage,
            message: format!("{} is missing; run the `{producer}` stage first", path.display()),
        });
    }
    crate::artifacts::read(&path)
}
