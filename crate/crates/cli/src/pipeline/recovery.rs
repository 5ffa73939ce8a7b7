//! Recovery curves, point paths and interval paths per destination.

use std::collections::BTreeMap;

use rayon::prelude::*;
use rise_core::recovery::{build_curve, coefficient_from_scores, interval_path, CurveInputs, IntervalCurve, RecoveryCurve, SeasonalProfile};
use rise_core::series::impute;
use rise_core::{Error, MonthKey, MonthlySeries};

use super::{month_of, series_from, upstream, Context, Stage, StageOutput};
use crate::artifacts::{
    self, BaseRecord, CoefficientRecord, CurveRecord, IntervalRecord, PointRecord, ReferenceRecord, COMBINED,
};
use crate::config::CoefficientMode;
use crate::error::{CliError, Result};

const STAGE: &str = "recovery";

struct Inputs {
    base: MonthlySeries,
    bounds: Vec<(MonthlySeries, MonthlySeries)>,
    reference: MonthlySeries,
}

fn group_inputs(ctx: &Context<'_>) -> Result<BTreeMap<String, Inputs>> {
    let base: Vec<BaseRecord> = upstream(ctx, STAGE, artifacts::BASE_FORECASTS, Stage::Base)?;
    let reference: Vec<ReferenceRecord> = upstream(ctx, STAGE, artifacts::REFERENCE_FORECASTS, Stage::Reference)?;

    type Points = Vec<(MonthKey, f64)>;
    let mut combined: BTreeMap<String, Points> = BTreeMap::new();
    let mut bounds: BTreeMap<(String, String), (Points, Points)> = BTreeMap::new();
    for r in &base {
        let m = month_of(STAGE, r.year, r.month)?;
        if r.model == COMBINED {
            combined.entry(r.destination.clone()).or_default().push((m, r.mean));
        } else if let (true, Some(lo), Some(hi)) = (r.retained, r.lower80, r.upper80) {
            let e = bounds.entry((r.destination.clone(), r.model.clone())).or_default();
            e.0.push((m, lo));
            e.1.push((m, hi));
        }
    }
    let mut refs: BTreeMap<String, Points> = BTreeMap::new();
    for r in &reference {
        refs.entry(r.destination.clone()).or_default().push((month_of(STAGE, r.year, r.month)?, r.reference));
    }

    let mut out = BTreeMap::new();
    for d in ctx.destinations() {
        let missing = |what: &str| CliError::Artifact { stage: STAGE, message: format!("{d}: no {what} rows") };
        let base = series_from(STAGE, &d, combined.get(&d).ok_or_else(|| missing("combined base forecast"))?)?;
        let reference = series_from(STAGE, &d, refs.get(&d).ok_or_else(|| missing("reference forecast"))?)?;
        let mut model_bounds = Vec::new();
        for ((dest, model), (lo, hi)) in &bounds {
            if *dest == d {
                let name = format!("{d}/{model}");
                model_bounds.push((series_from(STAGE, &name, lo)?, series_from(STAGE, &name, hi)?));
            }
        }
        out.insert(d, Inputs { base, bounds: model_bounds, reference });
    }
    Ok(out)
}

fn coefficient(ctx: &Context<'_>, d: &str) -> Result<CoefficientRecord> {
    let row = || {
        ctx.data
            .scores
            .get(d)
            .ok_or_else(|| CliError::Config(format!("destination `{d}` has no scores row")))
    };
    let (r, source) = match ctx.cfg.recovery.coefficient {
        CoefficientMode::Fixed(r) => (r, "fixed"),
        CoefficientMode::Formula => (coefficient_from_scores(&row()?.scores).r, "formula"),
        CoefficientMode::Table => {
            (row()?.r.ok_or_else(|| CliError::Config(format!("destination `{d}` has no tabulated r")))?, "table")
        }
    };
    if !(r > 0.0 && r <= 1.0) {
        return Err(CliError::Config(format!("{d}: recovery coefficient {r} outside (0, 1]")));
    }
    Ok(CoefficientRecord { destination: d.into(), r, source: source.into() })
}

struct Output {
    coefficient: CoefficientRecord,
    reference: MonthlySeries,
    curve: RecoveryCurve,
    interval: Option<IntervalCurve>,
    warnings: Vec<String>,
}

fn destination(ctx: &Context<'_>, d: &str, inputs: &Inputs) -> Result<Output> {
    let cfg = ctx.cfg;
    let err = |e: Error| CliError::stage(STAGE, d)(e);
    let coefficient = coefficient(ctx, d)?;
    let mut warnings = Vec::new();

    let pre_break = ctx.data.arrivals[d].through(cfg.split.spec.validation_end).and_then(|s| impute(&s)).map_err(err)?;
    let seasonal = SeasonalProfile::from_history(&pre_break, cfg.recovery.seasonal).unwrap_or_else(|e| {
        warnings.push(format!("{d}: seasonal profile unavailable ({e}), using flat factors"));
        SeasonalProfile::flat()
    });
    let history = ctx.data.imputed(d).map_err(err)?;
    let curve_inputs = CurveInputs {
        history: &history,
        reference: &inputs.reference,
        base: &inputs.base,
        r: coefficient.r,
        seasonal: &seasonal,
        timeline: &cfg.recovery.timeline,
    };
    let built = build_curve(d, &curve_inputs).map_err(err)?;
    warnings.extend(built.warnings);
    let interval = match interval_path(d, &inputs.bounds, &curve_inputs, &built.curve) {
        Ok(i) => {
            warnings.extend(i.warnings.iter().cloned());
            Some(i)
        }
        Err(Error::NoBounds) => {
            warnings.push(format!("{d}: no retained model has bounds, interval skipped"));
            None
        }
        Err(e) => return Err(err(e)),
    };
    Ok(Output { coefficient, reference: inputs.reference.clone(), curve: built.curve, interval, warnings })
}

pub(super) fn run(ctx: &Context<'_>) -> Result<StageOutput> {
    let inputs = group_inputs(ctx)?;
    let dests = ctx.destinations();
    let results: Vec<Result<Output>> = dests.par_iter().map(|d| destination(ctx, d, &inputs[d])).collect();

    let (mut coefs, mut curves, mut points, mut intervals, mut warnings) = (Vec::new(), Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let initial = ctx.cfg.recovery.timeline.initial;
    for (d, r) in dests.iter().zip(results) {
        let out = r?;
        warnings.extend(out.warnings);
        coefs.push(out.coefficient);
        for (i, v) in out.reference.values().iter().enumerate() {
            let m = out.reference.month_at(i);
            if m < initial {
                let point = v.expect("reference series is complete");
                points.push(PointRecord { destination: d.clone(), year: m.year(), month: m.month(), point, source: "reference".into() });
            }
        }
        let c = &out.curve;
        for (t, m) in c.months().enumerate() {
            let bounds = out.interval.as_ref().map(|i| (i.lower.point_path[t], i.upper.point_path[t]));
            curves.push(CurveRecord {
                destination: d.clone(),
                year: m.year(),
                month: m.month(),
                step: t,
                linear: c.trend_linear[t],
                quadratic: c.trend_quadratic[t],
                logistic: c.trend_logistic[t],
                trend: c.trend_mean[t],
                seasonal: c.seasonal[t],
                point: c.point_path[t],
                lower80: bounds.map(|b| b.0),
                upper80: bounds.map(|b| b.1),
            });
            points.push(PointRecord { destination: d.clone(), year: m.year(), month: m.month(), point: c.point_path[t], source: "curve".into() });
            if let Some((lower80, upper80)) = bounds {
                intervals.push(IntervalRecord { destination: d.clone(), year: m.year(), month: m.month(), lower80, upper80 });
            }
        }
    }

    let mut files = Vec::new();
    for (name, result) in [
        (artifacts::COEFFICIENTS, artifacts::write(&ctx.path(artifacts::COEFFICIENTS), &coefs)),
        (artifacts::RECOVERY_CURVES, artifacts::write(&ctx.path(artifacts::RECOVERY_CURVES), &curves)),
        (artifacts::POINT_FORECASTS, artifacts::write(&ctx.path(artifacts::POINT_FORECASTS), &points)),
        (artifacts::INTERVAL_FORECASTS, artifacts::write(&ctx.path(artifacts::INTERVAL_FORECASTS), &intervals)),
    ] {
        result?;
        files.push(ctx.path(name));
    }
    Ok(StageOutput { files, warnings })
}
