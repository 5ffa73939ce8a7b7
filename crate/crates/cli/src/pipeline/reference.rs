//! Reference forecasts for the gap between the last observation and the
//! initial month of the recovery curve.

use rayon::prelude::*;
use rise_core::signals::{reference_forecast, ReferenceForecast};
use rise_core::Error;

use super::{Context, StageOutput};
use crate::artifacts::{self, KeywordRecord, ReferenceRecord};
use crate::error::{CliError, Result};

const STAGE: &str = "reference";

fn destination(ctx: &Context<'_>, d: &str) -> Result<(ReferenceForecast, Vec<String>)> {
    let err = CliError::stage(STAGE, d);
    let history = ctx.data.imputed(d).map_err(err)?;
    let origin = history.end();
    let horizon = ctx.cfg.recovery.timeline.initial.months_since(origin);
    if horizon < 1 {
        return Err(CliError::stage(STAGE, d)(Error::InvalidSpec(format!(
            "history ends {origin}, at or after the initial month"
        ))));
    }
    let keywords = ctx.data.keywords.get(d).map(Vec::as_slice).unwrap_or(&[]);
    match reference_forecast(d, &history, keywords, ctx.data.flights.get(d), horizon as usize, &ctx.cfg.reference) {
        Ok(rf) => {
            let warnings = rf.warnings.clone();
            Ok((rf, warnings))
        }
        Err(Error::NoSignal(_)) => {
            let last = history.dense().map_err(CliError::stage(STAGE, d))?.last().copied().unwrap_or(0.0);
            let rf = ReferenceForecast {
                origin,
                path: vec![last; horizon as usize],
                index_branch: None,
                flight_branch: None,
                composite: None,
                warnings: Vec::new(),
            };
            Ok((rf, vec![format!("{d}: no usable signal, reference carries the last observation forward")]))
        }
        Err(e) => Err(CliError::stage(STAGE, d)(e)),
    }
}

pub(super) fn run(ctx: &Context<'_>) -> Result<StageOutput> {
    let dests = ctx.destinations();
    let results: Vec<Result<(ReferenceForecast, Vec<String>)>> = dests.par_iter().map(|d| destination(ctx, d)).collect();
    let mut rows = Vec::new();
    let mut keywords = Vec::new();
    let mut warnings = Vec::new();
    for (d, r) in dests.iter().zip(results) {
        let (rf, w) = r?;
        warnings.extend(w);
        for (h, v) in rf.path.iter().enumerate() {
            let m = rf.origin.add(h as i32 + 1);
            rows.push(ReferenceRecord {
                destination: d.clone(),
                year: m.year(),
                month: m.month(),
                reference: *v,
                index_branch: rf.index_branch.as_ref().map(|b| b[h]),
                flight_branch: rf.flight_branch.as_ref().map(|b| b[h]),
            });
        }
        if let Some(c) = &rf.composite {
            for (kw, corr) in &c.correlations {
                keywords.push(KeywordRecord {
                    destination: d.clone(),
                    keyword: kw.clone(),
                    correlation: *corr,
                    included: c.included_keywords.contains(kw),
                });
            }
        }
    }
    let (ref_path, kw_path) = (ctx.path(artifacts::REFERENCE_FORECASTS), ctx.path(artifacts::KEYWORDS_SELECTED));
    artifacts::write(&ref_path, &rows)?;
    artifacts::write(&kw_path, &keywords)?;
    Ok(StageOutput { files: vec![ref_path, kw_path], warnings })
}
