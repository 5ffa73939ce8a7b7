//! Point and interval scoring of the pipeline against held-out actuals, plus
//! benchmark models fitted to the full observed history.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use rise_core::eval::{report, DestinationPaths, EvaluationReport, MetricRow};
use rise_core::models::fit_forecast;
use rise_core::series::{load_csv, Schema};
use rise_core::{MonthKey, MonthlySeries};

use super::{month_of, upstream, Context, Stage, StageOutput};
use crate::artifacts::{
    self, BenchmarkRecord, IntervalMetricRecord, IntervalRecord, MetricRecord, PointRecord,
};
use crate::error::{CliError, Result};
use crate::rng::substream;

const STAGE: &str = "evaluate";

fn window(ctx: &Context<'_>) -> Vec<MonthKey> {
    let e = &ctx.cfg.evaluate;
    (0..=e.end.months_since(e.start)).map(|i| e.start.add(i)).collect()
}

fn values_over(name: &str, what: &str, lookup: impl Fn(MonthKey) -> Option<f64>, months: &[MonthKey]) -> Result<Vec<f64>> {
    months
        .iter()
        .map(|m| {
            lookup(*m).ok_or_else(|| CliError::Artifact { stage: STAGE, message: format!("{name}: no {what} for {m}") })
        })
        .collect()
}

fn metric_record(r: &MetricRow) -> MetricRecord {
    MetricRecord { destination: r.destination.clone(), rmse: r.rmse, mape: r.mape, mase: r.mase }
}

fn benchmark(ctx: &Context<'_>, actuals: &BTreeMap<String, Vec<f64>>, insample: &BTreeMap<String, MonthlySeries>, months: &[MonthKey]) -> Result<Vec<(String, EvaluationReport)>> {
    let opts = ctx.cfg.evaluate.options;
    let mut out = Vec::new();
    for spec in &ctx.cfg.evaluate.benchmarks {
        let paths: Vec<Result<DestinationPaths>> = insample
            .par_iter()
            .map(|(d, hist)| {
                let err = CliError::stage(STAGE, d);
                let horizon = months.last().expect("non-empty window").months_since(hist.end());
                if horizon < 1 {
                    return Err(CliError::Artifact { stage: STAGE, message: format!("{d}: history overlaps the evaluation window") });
                }
                let mut rng = substream(ctx.seed(), &format!("evaluate/{}/{d}", spec.id()));
                let fc = fit_forecast(hist, spec, horizon as usize, &mut rng).map_err(err)?;
                let point = values_over(d, "benchmark forecast", |m| fc.at(m), months)?;
                Ok(DestinationPaths {
                    destination: d.clone(),
                    actual: actuals[d].clone(),
                    point,
                    interval: None,
                    insample: hist.dense().map_err(CliError::stage(STAGE, d))?,
                })
            })
            .collect();
        let paths = paths.into_iter().collect::<Result<Vec<_>>>()?;
        let rep = report(&paths, opts).map_err(|source| CliError::Stage { stage: STAGE, destination: None, source })?;
        out.push((spec.id().to_string(), rep));
    }
    Ok(out)
}

fn summary(rise: &EvaluationReport, benchmarks: &[(String, EvaluationReport)], months: &[MonthKey]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# Recovery forecast evaluation\n");
    let _ = writeln!(s, "Window: {} to {} ({} months).\n", months[0], months[months.len() - 1], months.len());
    s.push_str("## Pipeline\n\n");
    s.push_str(&rise.to_markdown());
    if !benchmarks.is_empty() {
        s.push_str("\n## Mean MASE against benchmarks\n\n| Method | Mean MASE | Weighted MASE |\n|---|---:|---:|\n");
        let _ = writeln!(s, "| pipeline | {:.4} | {:.4} |", rise.point_average.mase, rise.point_weighted.mase);
        for (id, r) in benchmarks {
            let _ = writeln!(s, "| {id} | {:.4} | {:.4} |", r.point_average.mase, r.point_weighted.mase);
        }
        s.push_str("\n| Destination | pipeline |");
        for (id, _) in benchmarks {
            let _ = write!(s, " {id} |");
        }
        s.push_str("\n|---|---:|");
        s.push_str(&"---:|".repeat(benchmarks.len()));
        s.push('\n');
        for (i, row) in rise.points.iter().enumerate() {
            let _ = write!(s, "| {} | {:.4} |", row.destination, row.mase);
            for (_, r) in benchmarks {
                let _ = write!(s, " {:.4} |", r.points[i].mase);
            }
            s.push('\n');
        }
    }
    if !rise.skipped.is_empty() {
        s.push_str("\nMonths with zero actuals left out of MAPE:");
        for (d, n) in &rise.skipped {
            let _ = write!(s, " {d} ({n})");
        }
        s.push('\n');
    }
    s
}

pub(super) fn run(ctx: &Context<'_>) -> Result<StageOutput> {
    let Some(actuals_path) = &ctx.cfg.data.actuals else {
        return Err(CliError::Config("evaluate needs data.actuals".into()));
    };
    let actual_series = load_csv(actuals_path, &Schema::arrivals())
        .map_err(|e| CliError::Io { path: actuals_path.clone(), message: e.to_string() })?;
    let points: Vec<PointRecord> = upstream(ctx, STAGE, artifacts::POINT_FORECASTS, Stage::Recovery)?;
    let intervals: Vec<IntervalRecord> = upstream(ctx, STAGE, artifacts::INTERVAL_FORECASTS, Stage::Recovery)?;
    let months = window(ctx);

    let mut point_map: BTreeMap<(String, MonthKey), f64> = BTreeMap::new();
    for p in &points {
        point_map.insert((p.destination.clone(), month_of(STAGE, p.year, p.month)?), p.point);
    }
    let mut interval_map: BTreeMap<(String, MonthKey), (f64, f64)> = BTreeMap::new();
    for i in &intervals {
        interval_map.insert((i.destination.clone(), month_of(STAGE, i.year, i.month)?), (i.lower80, i.upper80));
    }

    let mut actuals = BTreeMap::new();
    let mut insample = BTreeMap::new();
    let mut paths = Vec::new();
    for d in ctx.destinations() {
        let a = actual_series
            .get(&d)
            .ok_or_else(|| CliError::Config(format!("destination `{d}` has no actuals")))?;
        let actual = values_over(&d, "actual", |m| a.get(m), &months)?;
        let point = values_over(&d, "point forecast", |m| point_map.get(&(d.clone(), m)).copied(), &months)?;
        let interval = months
            .iter()
            .map(|m| interval_map.get(&(d.clone(), *m)).copied())
            .collect::<Option<Vec<(f64, f64)>>>()
            .map(|v| v.into_iter().unzip());
        let hist = ctx.data.imputed(&d).map_err(CliError::stage(STAGE, &d))?;
        paths.push(DestinationPaths {
            destination: d.clone(),
            actual: actual.clone(),
            point,
            interval,
            insample: hist.dense().map_err(CliError::stage(STAGE, &d))?,
        });
        actuals.insert(d.clone(), actual);
        insample.insert(d, hist);
    }
    let opts = ctx.cfg.evaluate.options;
    let rise = report(&paths, opts).map_err(|source| CliError::Stage { stage: STAGE, destination: None, source })?;
    let benchmarks = benchmark(ctx, &actuals, &insample, &months)?;

    let point_rows: Vec<MetricRecord> = rise.point_table().map(metric_record).collect();
    let interval_rows: Vec<IntervalMetricRecord> = rise
        .interval_table()
        .map(|r| IntervalMetricRecord {
            destination: r.destination.clone(),
            winkler: r.winkler,
            standard_winkler: r.standard_winkler,
            coverage: r.coverage,
        })
        .collect();
    let bench_rows: Vec<BenchmarkRecord> = benchmarks
        .iter()
        .flat_map(|(id, r)| {
            r.point_table().map(move |row| BenchmarkRecord {
                destination: row.destination.clone(),
                model: id.clone(),
                rmse: row.rmse,
                mape: row.mape,
                mase: row.mase,
            })
        })
        .collect();

    let files = vec![
        ctx.path(artifacts::POINT_METRICS),
        ctx.path(artifacts::INTERVAL_METRICS),
        ctx.path(artifacts::BENCHMARK_METRICS),
        ctx.path(artifacts::SUMMARY),
    ];
    artifacts::write(&files[0], &point_rows)?;
    artifacts::write(&files[1], &interval_rows)?;
    artifacts::write(&files[2], &bench_rows)?;
    std::fs::write(&files[3], summary(&rise, &benchmarks, &months)).map_err(CliError::io(&files[3]))?;
    let warnings = rise
        .skipped
        .iter()
        .map(|(d, n)| format!("{d}: {n} zero-actual month(s) left out of MAPE"))
        .collect();
    Ok(StageOutput { files, warnings })
}
