//! Base forecasts: validate the zoo and the hierarchical methods, screen the
//! pooled table, fit combination weights per destination, refit on the full
//! pre-break history and relabel onto the post-break window.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use rise_core::combine::{combine, fit_weights, screen_models, CombinationMethod, CombinationSpec, CombinationWeights};
use rise_core::hierarchy::{hierarchical_forecasts, HierarchicalOutput};
use rise_core::models::{fit_forecast, score_forecast, validate_models, ForecastResult, ValidationMetrics};
use rise_core::series::{impute, split};
use rise_core::{Error, MonthlySeries};

use super::{Context, StageOutput};
use crate::artifacts::{self, BaseRecord, ScreeningRecord, ValidationRecord, WeightRecord, COMBINED};
use crate::error::{CliError, Result};
use crate::rng::{substream, substream_u64};

const STAGE: &str = "base";

const COMBINATIONS: [CombinationMethod; 4] = [
    CombinationMethod::Simple,
    CombinationMethod::ErrorWeighted,
    CombinationMethod::StackLasso,
    CombinationMethod::StackRidge,
];

/// One model's validation result and refit forecast for one destination.
struct Candidate {
    model: String,
    kind: &'static str,
    metrics: std::result::Result<ValidationMetrics, Error>,
    validation_path: Option<Vec<f64>>,
    refit: std::result::Result<ForecastResult, Error>,
}

impl Candidate {
    fn usable(&self) -> bool {
        self.metrics.is_ok() && self.validation_path.is_some() && self.refit.is_ok()
    }

    fn status(&self) -> String {
        match (&self.metrics, &self.refit) {
            (Err(e), _) => format!("validation failed: {e}"),
            (_, Err(e)) => format!("refit failed: {e}"),
            _ => "ok".into(),
        }
    }
}

struct Histories {
    full: BTreeMap<String, MonthlySeries>,
    train: BTreeMap<String, MonthlySeries>,
    validation: BTreeMap<String, MonthlySeries>,
}

fn histories(ctx: &Context<'_>, dests: &[String]) -> Result<Histories> {
    let spec = ctx.cfg.split.spec;
    let mut h = Histories { full: BTreeMap::new(), train: BTreeMap::new(), validation: BTreeMap::new() };
    for d in dests {
        let err = CliError::stage(STAGE, d);
        let raw = &ctx.data.arrivals[d];
        let full = raw.through(spec.validation_end).and_then(|s| impute(&s)).map_err(err)?;
        let (train, validation) = split(&full, &spec).map_err(CliError::stage(STAGE, d))?;
        h.full.insert(d.clone(), full);
        h.train.insert(d.clone(), train);
        h.validation.insert(d.clone(), validation);
    }
    Ok(h)
}

fn univariate(ctx: &Context<'_>, dests: &[String], h: &Histories) -> Result<BTreeMap<String, Vec<Candidate>>> {
    let cfg = ctx.cfg;
    let results: Vec<Result<Vec<Candidate>>> = dests
        .par_iter()
        .map(|d| {
            let (train, validation, full) = (&h.train[d], &h.validation[d], &h.full[d]);
            let seed = substream_u64(ctx.seed(), &format!("base/validate/{d}"));
            let rows = validate_models(train, validation, &cfg.models, seed).map_err(CliError::stage(STAGE, d))?;
            Ok(rows
                .into_iter()
                .zip(&cfg.models)
                .map(|(row, spec)| {
                    let mut rng = substream(ctx.seed(), &format!("base/refit/{d}/{}", spec.id()));
                    Candidate {
                        model: row.model_id,
                        kind: "univariate",
                        metrics: row.metrics,
                        validation_path: row.forecast.map(|f| f.mean),
                        refit: fit_forecast(full, spec, cfg.split.horizon, &mut rng),
                    }
                })
                .collect())
        })
        .collect();
    dests.iter().cloned().zip(results).map(|(d, r)| r.map(|c| (d, c))).collect()
}

/// Leaves trimmed to their common first month so the tree sees aligned series.
fn aligned(series: &BTreeMap<String, MonthlySeries>) -> rise_core::Result<BTreeMap<String, MonthlySeries>> {
    let start = series.values().map(MonthlySeries::start).max().expect("at least one destination");
    series.iter().map(|(d, s)| Ok((d.clone(), s.slice(start, s.end())?))).collect()
}

fn hierarchical(ctx: &Context<'_>, h: &Histories, table: &mut BTreeMap<String, Vec<Candidate>>, warnings: &mut Vec<String>) -> Result<()> {
    let cfg = ctx.cfg;
    if cfg.hierarchical.is_empty() {
        return Ok(());
    }
    let (train, full) = match (aligned(&h.train), aligned(&h.full)) {
        (Ok(t), Ok(f)) => (t, f),
        (Err(e), _) | (_, Err(e)) => {
            warnings.push(format!("hierarchical methods skipped: {e}"));
            return Ok(());
        }
    };
    let spec = cfg.split.spec;
    let val_h = spec.validation_end.months_since(spec.train_end) as usize;
    let validated = hierarchical_forecasts(&cfg.hierarchy, &train, &cfg.hierarchical, val_h);
    let refitted = hierarchical_forecasts(&cfg.hierarchy, &full, &cfg.hierarchical, cfg.split.horizon);
    let (validated, refitted) = match (validated, refitted) {
        (Ok(v), Ok(r)) => (v, r),
        (Err(e), _) | (_, Err(e)) => {
            warnings.push(format!("hierarchical methods skipped: {e}"));
            return Ok(());
        }
    };
    let pick = |out: &std::result::Result<HierarchicalOutput, Error>, d: &str| -> std::result::Result<ForecastResult, Error> {
        match out {
            Ok(map) => map.get(d).cloned().ok_or_else(|| Error::ShapeMismatch(format!("no reconciled forecast for {d}"))),
            Err(e) => Err(e.clone()),
        }
    };
    for method in &cfg.hierarchical {
        for (d, candidates) in table.iter_mut() {
            let val = pick(&validated[method], d);
            let metrics = val.as_ref().map_err(Clone::clone).and_then(|f| score_forecast(&h.train[d], &h.validation[d], f));
            candidates.push(Candidate {
                model: method.id().to_string(),
                kind: "hierarchical",
                metrics,
                validation_path: val.ok().map(|f| f.mean),
                refit: pick(&refitted[method], d),
            });
        }
    }
    Ok(())
}

/// Mean validation MAPE per model over the destinations where it worked.
fn screening(model_ids: &[String], table: &BTreeMap<String, Vec<Candidate>>, keep_fraction: f64) -> Result<(Vec<ScreeningRecord>, BTreeSet<String>)> {
    let mut pooled = Vec::new();
    let mut records = Vec::new();
    for id in model_ids {
        let mapes: Vec<f64> = table
            .values()
            .filter_map(|c| c.iter().find(|c| &c.model == id))
            .filter(|c| c.usable())
            .filter_map(|c| c.metrics.as_ref().ok().map(|m| m.mape))
            .collect();
        let mean = if mapes.is_empty() { f64::NAN } else { mapes.iter().sum::<f64>() / mapes.len() as f64 };
        pooled.push((id.clone(), mean));
        records.push(ScreeningRecord { model: id.clone(), mean_mape: mean.is_finite().then_some(mean), destinations_ok: mapes.len(), retained: false });
    }
    let retained: BTreeSet<String> = screen_models(&pooled, keep_fraction)
        .map_err(|source| CliError::Stage { stage: STAGE, destination: None, source })?
        .into_iter()
        .collect();
    for r in &mut records {
        r.retained = retained.contains(&r.model);
    }
    Ok((records, retained))
}

struct Combined {
    validation: Vec<ValidationRecord>,
    weights: Vec<WeightRecord>,
    base: Vec<BaseRecord>,
    warnings: Vec<String>,
}

fn combine_destination(
    ctx: &Context<'_>,
    d: &str,
    candidates: &[Candidate],
    retained: &BTreeSet<String>,
    h: &Histories,
) -> Result<Combined> {
    let cfg = ctx.cfg;
    let err = |e| CliError::stage(STAGE, d)(e);
    let (train, validation) = (&h.train[d], &h.validation[d]);
    let actual = validation.dense().map_err(err)?;
    let mut out = Combined { validation: Vec::new(), weights: Vec::new(), base: Vec::new(), warnings: Vec::new() };

    let chosen: Vec<&Candidate> = candidates.iter().filter(|c| retained.contains(&c.model) && c.usable()).collect();
    for c in candidates {
        let m = c.metrics.as_ref().ok();
        out.validation.push(ValidationRecord {
            destination: d.into(),
            model: c.model.clone(),
            kind: c.kind.into(),
            rmse: m.map(|m| m.rmse),
            mape: m.map(|m| m.mape),
            mase: m.map(|m| m.mase),
            retained: chosen.iter().any(|k| k.model == c.model),
            status: c.status(),
        });
    }
    if chosen.is_empty() {
        return Err(err(Error::EmptyTable));
    }

    let ids: Vec<String> = chosen.iter().map(|c| c.model.clone()).collect();
    let val_paths: Vec<Vec<f64>> = chosen.iter().map(|c| c.validation_path.clone().expect("usable")).collect();
    let val_map: BTreeMap<String, Vec<f64>> = ids.iter().cloned().zip(val_paths.iter().cloned()).collect();
    let mut selected: Option<CombinationWeights> = None;
    for method in COMBINATIONS {
        let spec = CombinationSpec { method, ..cfg.combination };
        let fitted = fit_weights(&ids, &val_paths, &actual, &spec);
        let (weights, status) = match fitted {
            Ok(w) => (Some(w), "ok".to_string()),
            Err(e) => (None, format!("weights failed: {e}")),
        };
        let metrics = weights.as_ref().and_then(|w| {
            let path = combine(&val_map, w).ok()?;
            let fc = ForecastResult { origin: train.end(), mean: path, lower80: None, upper80: None, model_id: method.id().into() };
            score_forecast(train, validation, &fc).ok()
        });
        out.validation.push(ValidationRecord {
            destination: d.into(),
            model: method.id().into(),
            kind: "combination".into(),
            rmse: metrics.map(|m| m.rmse),
            mape: metrics.map(|m| m.mape),
            mase: metrics.map(|m| m.mase),
            retained: method == cfg.combination.method,
            status,
        });
        if let Some(w) = &weights {
            for (model, weight) in &w.weights {
                out.weights.push(WeightRecord { destination: d.into(), method: method.id().into(), model: model.clone(), weight: *weight });
            }
        }
        if method == cfg.combination.method {
            selected = weights;
        }
    }
    let weights = match selected {
        Some(w) => w,
        None => {
            out.warnings.push(format!("{d}: {} weights failed, using the simple average", cfg.combination.method));
            CombinationWeights { weights: ids.iter().map(|id| (id.clone(), 1.0 / ids.len() as f64)).collect() }
        }
    };

    let refits: Vec<&ForecastResult> = chosen.iter().map(|c| c.refit.as_ref().expect("usable")).collect();
    let refit_map: BTreeMap<String, Vec<f64>> = ids.iter().cloned().zip(refits.iter().map(|f| f.mean.clone())).collect();
    let mean = combine(&refit_map, &weights).map_err(err)?;
    let bounded: Vec<&&ForecastResult> = refits.iter().filter(|f| f.has_bounds()).collect();
    let avg_bound = |pick: fn(&ForecastResult) -> &Vec<f64>, h: usize| -> Option<f64> {
        (!bounded.is_empty()).then(|| bounded.iter().map(|f| pick(f)[h]).sum::<f64>() / bounded.len() as f64)
    };

    let shift = cfg.split.relabel_months;
    for c in candidates {
        let Ok(f) = &c.refit else { continue };
        let keep = chosen.iter().any(|k| k.model == c.model);
        for (h, m) in f.months().enumerate() {
            let m = m.add(shift);
            out.base.push(BaseRecord {
                destination: d.into(),
                model: c.model.clone(),
                retained: keep,
                year: m.year(),
                month: m.month(),
                mean: f.mean[h],
                lower80: f.lower80.as_ref().map(|v| v[h]),
                upper80: f.upper80.as_ref().map(|v| v[h]),
            });
        }
    }
    let origin = refits[0].origin;
    for (h, v) in mean.iter().enumerate() {
        let m = origin.add(h as i32 + 1 + shift);
        out.base.push(BaseRecord {
            destination: d.into(),
            model: COMBINED.into(),
            retained: true,
            year: m.year(),
            month: m.month(),
            mean: v.max(0.0),
            lower80: avg_bound(|f| f.lower80.as_ref().expect("bounded"), h),
            upper80: avg_bound(|f| f.upper80.as_ref().expect("bounded"), h),
        });
    }
    Ok(out)
}

pub(super) fn run(ctx: &Context<'_>) -> Result<StageOutput> {
    let dests = ctx.destinations();
    let h = histories(ctx, &dests)?;
    let mut warnings = Vec::new();
    let mut table = univariate(ctx, &dests, &h)?;
    hierarchical(ctx, &h, &mut table, &mut warnings)?;

    let model_ids: Vec<String> = ctx
        .cfg
        .models
        .iter()
        .map(|m| m.id().to_string())
        .chain(ctx.cfg.hierarchical.iter().map(|m| m.id().to_string()))
        .collect();
    let (screen, retained) = screening(&model_ids, &table, ctx.cfg.combination.keep_fraction)?;

    let combined: Vec<Result<Combined>> =
        dests.par_iter().map(|d| combine_destination(ctx, d, &table[d], &retained, &h)).collect();
    let (mut validation, mut weights, mut base) = (Vec::new(), Vec::new(), Vec::new());
    for c in combined {
        let c = c?;
        validation.extend(c.validation);
        weights.extend(c.weights);
        base.extend(c.base);
        warnings.extend(c.warnings);
    }

    let mut files = Vec::new();
    let mut emit = |name: &str, write: &dyn Fn(&std::path::Path) -> Result<()>| -> Result<()> {
        let path = ctx.path(name);
        write(&path)?;
        files.push(path);
        Ok(())
    };
    emit(artifacts::VALIDATION_METRICS, &|p| artifacts::write(p, &validation))?;
    emit(artifacts::MODEL_SCREENING, &|p| artifacts::write(p, &screen))?;
    emit(artifacts::WEIGHTS, &|p| artifacts::write(p, &weights))?;
    emit(artifacts::BASE_FORECASTS, &|p| artifacts::write(p, &base))?;
    Ok(StageOutput { files, warnings })
}
