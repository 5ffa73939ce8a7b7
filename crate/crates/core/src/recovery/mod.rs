//! Recovery coefficients, anchor points and recovery-curve synthesis.
//!
//! A recovery curve runs monthly from the initial month (first reference
//! forecast month used as anchor) to the terminal month. Its trend is the
//! mean of a linear, a weighted quadratic and a logistic shape fitted in
//! seasonally adjusted units; the point path multiplies that trend by
//! calendar-month seasonal factors.

mod seasonal;
mod trend;

pub use seasonal::{SeasonalMode, SeasonalProfile};
pub use trend::{
    fit_logistic, fit_quadratic, trend_linear, trend_logistic, trend_quadratic, Logistic, Quadratic, MAX_CONDITION,
};

use std::fmt;
use std::str::FromStr;

use log::warn;

use crate::error::{Error, Result};
use crate::series::{MonthKey, MonthlySeries};

pub const FORMULA_INTERCEPT: f64 = 0.45;
pub const FORMULA_SLOPE: f64 = 0.10;

/// `(average score, r)` for the three calibration destinations.
pub const SCORE_ANCHORS: [(f64, f64); 3] = [(2.0, 0.65), (3.7, 1.0), (4.3, 0.85)];

/// Policy, distance and recovery scores on a 1..=5 scale.
#[derive(Debug, Clone, PartialEq)]
pub struct DestinationScores {
    pub destination: String,
    pub policy: u8,
    pub distance: u8,
    pub recovery: u8,
}

impl DestinationScores {
    pub fn new(destination: impl Into<String>, policy: u8, distance: u8, recovery: u8) -> Result<Self> {
        let destination = destination.into();
        if [policy, distance, recovery].iter().any(|s| !(1..=5).contains(s)) {
            return Err(Error::InvalidSpec(format!("{destination}: scores must lie in 1..=5")));
        }
        Ok(Self { destination, policy, distance, recovery })
    }

    pub fn average(&self) -> f64 {
        (f64::from(self.policy) + f64::from(self.distance) + f64::from(self.recovery)) / 3.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoefficientSource {
    Table,
    Formula,
    Fixed,
}

impl fmt::Display for CoefficientSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CoefficientSource::Table => "table",
            CoefficientSource::Formula => "formula",
            CoefficientSource::Fixed => "fixed",
        })
    }
}

impl FromStr for CoefficientSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "table" => CoefficientSource::Table,
            "formula" => CoefficientSource::Formula,
            "fixed" => CoefficientSource::Fixed,
            other => return Err(Error::InvalidSpec(format!("unknown coefficient source `{other}`"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryCoefficient {
    pub destination: String,
    pub r: f64,
    pub source: CoefficientSource,
}

impl RecoveryCoefficient {
    pub fn new(destination: impl Into<String>, r: f64, source: CoefficientSource) -> Result<Self> {
        let destination = destination.into();
        if !(r > 0.0 && r <= 1.0) {
            return Err(Error::InvalidSpec(format!("{destination}: recovery coefficient {r} outside (0, 1]")));
        }
        Ok(Self { destination, r, source })
    }
}

/// `r = 0.45 + 0.10 * average`, clamped to `(0, 1]`.
pub fn coefficient_from_scores(scores: &DestinationScores) -> RecoveryCoefficient {
    let r = (FORMULA_INTERCEPT + FORMULA_SLOPE * scores.average()).clamp(f64::MIN_POSITIVE, 1.0);
    RecoveryCoefficient { destination: scores.destination.clone(), r, source: CoefficientSource::Formula }
}

/// Ordinary least squares of `r` on the average score; returns
/// `(slope, intercept)`.
pub fn fit_anchor_regression(anchors: &[(f64, f64)]) -> Result<(f64, f64)> {
    let n = anchors.len() as f64;
    if anchors.len() < 2 {
        return Err(Error::DegenerateX);
    }
    let mx = anchors.iter().map(|a| a.0).sum::<f64>() / n;
    let my = anchors.iter().map(|a| a.1).sum::<f64>() / n;
    let sxx: f64 = anchors.iter().map(|a| (a.0 - mx).powi(2)).sum();
    if sxx <= 1e-12 * mx.abs().max(1.0).powi(2) {
        return Err(Error::DegenerateX);
    }
    let sxy: f64 = anchors.iter().map(|a| (a.0 - mx) * (a.1 - my)).sum();
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

/// Calendar layout of the recovery stage.
#[derive(Debug, Clone, PartialEq)]
pub struct Timeline {
    /// First month of the detrended history used by the fits (argument 1).
    pub history_start: MonthKey,
    /// Month of the initial anchor (curve step 0).
    pub initial: MonthKey,
    /// Month of the terminal anchor (last curve step).
    pub terminal: MonthKey,
    /// Extra base-forecast months used by the logistic fit besides the
    /// terminal month.
    pub logistic_months: Vec<MonthKey>,
    /// Weight of the terminal point in the quadratic fit.
    pub terminal_weight: f64,
}

impl Default for Timeline {
    fn default() -> Self {
        let m = |y, mo| MonthKey::new(y, mo).expect("valid month");
        Self {
            history_start: m(2022, 1),
            initial: m(2023, 6),
            terminal: m(2024, 7),
            logistic_months: vec![m(2023, 12), m(2024, 12)],
            terminal_weight: 18.0,
        }
    }
}

impl Timeline {
    pub fn validate(&self) -> Result<()> {
        if self.initial <= self.history_start || self.terminal <= self.initial {
            return Err(Error::InvalidSpec("recovery timeline must satisfy history start < initial < terminal".into()));
        }
        if !(self.terminal_weight >= 0.0) {
            return Err(Error::InvalidSpec("terminal weight must be non-negative".into()));
        }
        Ok(())
    }

    /// Number of curve months, initial and terminal included.
    pub fn steps(&self) -> usize {
        self.terminal.months_since(self.initial) as usize + 1
    }

    /// Fit argument of a month (history start = 1).
    pub fn arg(&self, month: MonthKey) -> f64 {
        f64::from(month.months_since(self.history_start) + 1)
    }

    pub fn months(&self) -> impl Iterator<Item = MonthKey> + '_ {
        (0..self.steps()).map(move |t| self.initial.add(t as i32))
    }
}

/// Initial and terminal points, raw and seasonally adjusted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Anchors {
    pub initial: f64,
    pub terminal: f64,
    pub initial_detrended: f64,
    pub terminal_detrended: f64,
}

fn value_at(series: &MonthlySeries, month: MonthKey, what: &str) -> Result<f64> {
    series.get(month).ok_or_else(|| Error::MissingMonth(format!("{what} {month}")))
}

/// Initial = reference at the initial month; terminal = base at the
/// terminal month times `r`.
pub fn anchors(
    base: &MonthlySeries,
    reference: &MonthlySeries,
    r: f64,
    seasonal: &SeasonalProfile,
    timeline: &Timeline,
) -> Result<Anchors> {
    let initial = value_at(reference, timeline.initial, "reference forecast")?;
    let terminal = value_at(base, timeline.terminal, "base forecast")? * r;
    Ok(Anchors {
        initial,
        terminal,
        initial_detrended: initial / seasonal.factor(timeline.initial),
        terminal_detrended: terminal / seasonal.factor(timeline.terminal),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryCurve {
    pub destination: String,
    pub start: MonthKey,
    pub trend_linear: Vec<f64>,
    pub trend_quadratic: Vec<f64>,
    pub trend_logistic: Vec<f64>,
    pub trend_mean: Vec<f64>,
    pub seasonal: Vec<f64>,
    pub point_path: Vec<f64>,
}

impl RecoveryCurve {
    pub fn len(&self) -> usize {
        self.point_path.len()
    }

    pub fn is_empty(&self) -> bool {
        self.point_path.is_empty()
    }

    pub fn months(&self) -> impl Iterator<Item = MonthKey> + '_ {
        (0..self.len()).map(move |t| self.start.add(t as i32))
    }

    pub fn at(&self, month: MonthKey) -> Option<f64> {
        let t = month.months_since(self.start);
        (t >= 0 && (t as usize) < self.len()).then(|| self.point_path[t as usize])
    }
}

/// Averages three trend paths and applies the seasonal factors.
pub fn synthesize(
    destination: &str,
    start: MonthKey,
    linear: Vec<f64>,
    quadratic: Vec<f64>,
    logistic: Vec<f64>,
    seasonal: Vec<f64>,
) -> Result<RecoveryCurve> {
    let n = linear.len();
    for path in [&quadratic, &logistic, &seasonal] {
        if path.len() != n {
            return Err(Error::LengthMismatch(path.len(), n));
        }
    }
    for path in [&linear, &quadratic, &logistic] {
        if let Some(t) = path.iter().position(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::NonPositiveTrend(t));
        }
    }
    let trend_mean: Vec<f64> = (0..n).map(|t| (linear[t] + quadratic[t] + logistic[t]) / 3.0).collect();
    let point_path = trend_mean.iter().zip(&seasonal).map(|(a, s)| a * s).collect();
    Ok(RecoveryCurve {
        destination: destination.to_string(),
        start,
        trend_linear: linear,
        trend_quadratic: quadratic,
        trend_logistic: logistic,
        trend_mean,
        seasonal,
        point_path,
    })
}

/// Everything one destination's curve is fitted from.
#[derive(Debug, Clone, Copy)]
pub struct CurveInputs<'a> {
    /// Observed arrivals covering the history window.
    pub history: &'a MonthlySeries,
    /// Reference forecasts from the end of history through the initial month.
    pub reference: &'a MonthlySeries,
    /// Base (or bound) forecasts covering the terminal and logistic months.
    pub base: &'a MonthlySeries,
    pub r: f64,
    pub seasonal: &'a SeasonalProfile,
    pub timeline: &'a Timeline,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveBuild {
    pub curve: RecoveryCurve,
    pub anchors: Anchors,
    pub quadratic: Option<Quadratic>,
    pub logistic: Option<Logistic>,
    pub warnings: Vec<String>,
}

/// Fits the three trend shapes and synthesises the curve. A shape that
/// cannot be fitted, or is not positive, is replaced by the linear trend
/// and reported in `warnings`.
pub fn build_curve(destination: &str, inputs: &CurveInputs<'_>) -> Result<CurveBuild> {
    let tl = inputs.timeline;
    tl.validate()?;
    let seasonal = inputs.seasonal;
    let anchors = anchors(inputs.base, inputs.reference, inputs.r, seasonal, tl)?;
    let steps = tl.steps();
    let offset = tl.arg(tl.initial);
    let mut warnings = Vec::new();

    let linear = trend_linear(anchors.initial_detrended, anchors.terminal_detrended, steps);

    let mut detrended_history = Vec::new();
    let mut month = tl.history_start;
    while month <= tl.initial {
        let v = match inputs.reference.get(month).or_else(|| inputs.history.get(month)) {
            Some(v) => v,
            None => return Err(Error::MissingMonth(format!("history or reference {month}"))),
        };
        detrended_history.push((tl.arg(month), v / seasonal.factor(month)));
        month = month.succ();
    }

    let mut fallback = |name: &str, why: String| {
        let msg = format!("{destination}: {name} trend replaced by linear ({why})");
        warn!("{msg}");
        warnings.push(msg);
        linear.clone()
    };

    let quad_fit = trend_quadratic(
        &detrended_history,
        (tl.arg(tl.terminal), anchors.terminal_detrended),
        tl.terminal_weight,
        offset,
        steps,
    );
    let (quadratic, quad_params) = match quad_fit {
        Ok((q, path)) if path.iter().all(|v| *v > 0.0 && v.is_finite()) => (path, Some(q)),
        Ok((q, _)) => (fallback("quadratic", "non-positive values".into()), Some(q)),
        Err(e) => (fallback("quadratic", e.to_string()), None),
    };

    let mut logistic_points = vec![detrended_history[0], (offset, anchors.initial_detrended)];
    let mut base_months = tl.logistic_months.clone();
    base_months.push(tl.terminal);
    base_months.sort();
    for m in base_months {
        let v = value_at(inputs.base, m, "base forecast")?;
        logistic_points.push((tl.arg(m), v / seasonal.factor(m)));
    }
    let (logistic, logistic_params) = match trend_logistic(&logistic_points, offset, steps) {
        Ok((p, path)) if path.iter().all(|v| *v > 0.0 && v.is_finite()) => (path, Some(p)),
        Ok((p, _)) => (fallback("logistic", "non-positive values".into()), Some(p)),
        Err(e) => (fallback("logistic", e.to_string()), None),
    };

    let seasonal_path: Vec<f64> = tl.months().map(|m| seasonal.factor(m)).collect();
    let curve = synthesize(destination, tl.initial, linear, quadratic, logistic, seasonal_path)?;
    Ok(CurveBuild { curve, anchors, quadratic: quad_params, logistic: logistic_params, warnings })
}

/// Lower and upper recovery curves around a point curve.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalCurve {
    pub lower: RecoveryCurve,
    pub upper: RecoveryCurve,
    /// Months where the fitted bound curves crossed the point path and were
    /// widened to contain it.
    pub crossings: usize,
    pub warnings: Vec<String>,
}

fn mean_series(name: &str, paths: &[&MonthlySeries]) -> Result<MonthlySeries> {
    let start = paths.iter().map(|p| p.start()).max().expect("non-empty");
    let end = paths.iter().map(|p| p.end()).min().expect("non-empty");
    if end < start {
        return Err(Error::NoOverlap);
    }
    let len = end.months_since(start) as usize + 1;
    let values: Vec<Option<f64>> = (0..len)
        .map(|i| {
            let m = start.add(i as i32);
            let vals: Option<Vec<f64>> = paths.iter().map(|p| p.get(m)).collect();
            vals.map(|v| v.iter().sum::<f64>() / v.len() as f64)
        })
        .collect();
    MonthlySeries::new(name, start, values)
}

/// Averages the models' lower and upper 80% bound paths, runs each through
/// the curve pipeline in place of the base forecast, and widens the result
/// wherever it fails to bracket `point`.
pub fn interval_path(
    destination: &str,
    bounds: &[(MonthlySeries, MonthlySeries)],
    inputs: &CurveInputs<'_>,
    point: &RecoveryCurve,
) -> Result<IntervalCurve> {
    if bounds.is_empty() {
        return Err(Error::NoBounds);
    }
    let lower_base = mean_series("lower", &bounds.iter().map(|b| &b.0).collect::<Vec<_>>())?;
    let upper_base = mean_series("upper", &bounds.iter().map(|b| &b.1).collect::<Vec<_>>())?;
    let lower = build_curve(destination, &CurveInputs { base: &lower_base, ..*inputs })?;
    let upper = build_curve(destination, &CurveInputs { base: &upper_base, ..*inputs })?;
    let mut warnings = lower.warnings;
    warnings.extend(upper.warnings);
    let (mut lower, mut upper) = (lower.curve, upper.curve);
    let mut crossings = 0;
    for t in 0..point.len() {
        let p = point.point_path[t];
        let (lo, hi) = (lower.point_path[t], upper.point_path[t]);
        let new_lo = lo.min(hi).min(p);
        let new_hi = lo.max(hi).max(p);
        if new_lo != lo || new_hi != hi {
            crossings += 1;
        }
        lower.point_path[t] = new_lo;
        upper.point_path[t] = new_hi;
    }
    if crossings > 0 {
        let msg = format!("{destination}: interval curves widened at {crossings} month(s) to contain the point path");
        warn!("{msg}");
        warnings.push(msg);
    }
    Ok(IntervalCurve { lower, upper, crossings, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(y: i32, mo: u32) -> MonthKey {
        MonthKey::new(y, mo).unwrap()
    }

    #[test]
    fn formula_coefficients() {
        let canada = DestinationScores::new("Canada", 3, 1, 2).unwrap();
        assert_eq!(canada.average(), 2.0);
        assert!((coefficient_from_scores(&canada).r - 0.65).abs() <= 1e-12);
        let top = DestinationScores::new("x", 5, 5, 5).unwrap();
        assert!((coefficient_from_scores(&top).r - 0.95).abs() < 1e-12);
        assert!(DestinationScores::new("x", 6, 1, 1).is_err());
        assert!(RecoveryCoefficient::new("x", 0.0, CoefficientSource::Fixed).is_err());
    }

    #[test]
    fn anchor_regression() {
        let (slope, intercept) = fit_anchor_regression(&SCORE_ANCHORS).unwrap();
        assert!((0.10..=0.13).contains(&slope), "{slope}");
        assert!((0.44..=0.47).contains(&intercept), "{intercept}");
        assert_eq!(fit_anchor_regression(&[(0.0, 0.0), (1.0, 1.0)]).unwrap(), (1.0, 0.0));
        assert_eq!(fit_anchor_regression(&[(2.0, 0.5), (2.0, 0.7)]), Err(Error::DegenerateX));
    }

    fn fixture(level: f64) -> (MonthlySeries, MonthlySeries, MonthlySeries) {
        let history = MonthlySeries::from_values(
            "h",
            m(2022, 1),
            &(0..13).map(|t| level * (10.0 + t as f64)).collect::<Vec<_>>(),
        )
        .unwrap();
        let reference = MonthlySeries::from_values(
            "r",
            m(2023, 2),
            &(0..5).map(|t| level * (25.0 + 3.0 * t as f64)).collect::<Vec<_>>(),
        )
        .unwrap();
        let base =
            MonthlySeries::from_values("b", m(2023, 1), &(0..24).map(|t| level * (100.0 + t as f64)).collect::<Vec<_>>())
                .unwrap();
        (history, reference, base)
    }

    #[test]
    fn anchors_scale_the_terminal() {
        let (_, reference, base) = fixture(1.0);
        let flat = SeasonalProfile::flat();
        let a = anchors(&base, &reference, 0.65, &flat, &Timeline::default()).unwrap();
        assert_eq!(a.initial, 37.0);
        assert!((a.terminal - 0.65 * 118.0).abs() < 1e-12);
        assert_eq!(a.terminal_detrended, a.terminal);
        let one = anchors(&base, &reference, 1.0, &flat, &Timeline::default()).unwrap();
        assert_eq!(one.terminal, 118.0);
    }

    #[test]
    fn curve_properties() {
        let (history, reference, base) = fixture(1.0);
        let flat = SeasonalProfile::flat();
        let tl = Timeline::default();
        let inputs = CurveInputs { history: &history, reference: &reference, base: &base, r: 0.8, seasonal: &flat, timeline: &tl };
        let built = build_curve("x", &inputs).unwrap();
        let c = &built.curve;
        assert_eq!(c.len(), 14);
        assert_eq!(c.start, m(2023, 6));
        assert_eq!(c.trend_linear[0], built.anchors.initial_detrended);
        assert_eq!(c.point_path, c.trend_mean);
        assert!((c.point_path[0] / built.anchors.initial - 1.0).abs() < 0.02 + 0.1, "{}", c.point_path[0]);

        // Scale equivariance.
        let (h2, r2, b2) = fixture(1000.0);
        let scaled = build_curve("x", &CurveInputs { history: &h2, reference: &r2, base: &b2, ..inputs }).unwrap();
        for t in 0..14 {
            assert!((scaled.curve.trend_linear[t] / c.trend_linear[t] - 1000.0).abs() < 1e-9);
            assert!((scaled.curve.trend_quadratic[t] / c.trend_quadratic[t] - 1000.0).abs() < 1e-6);
            assert!((scaled.curve.trend_logistic[t] / c.trend_logistic[t] / 1000.0 - 1.0).abs() < 1e-6);
        }

        // Raising r raises the linear path.
        let higher = build_curve("x", &CurveInputs { r: 0.9, ..inputs }).unwrap();
        assert!(higher.curve.trend_linear[13] > c.trend_linear[13]);
        assert!((1..14).all(|t| higher.curve.trend_linear[t] >= c.trend_linear[t]));
    }

    #[test]
    fn identical_and_degenerate_bounds() {
        let (history, reference, base) = fixture(1.0);
        let flat = SeasonalProfile::flat();
        let tl = Timeline::default();
        let inputs = CurveInputs { history: &history, reference: &reference, base: &base, r: 0.8, seasonal: &flat, timeline: &tl };
        let point = build_curve("x", &inputs).unwrap().curve;
        let iv = interval_path("x", &[(base.clone(), base.clone()), (base.clone(), base.clone())], &inputs, &point).unwrap();
        assert_eq!(iv.lower.point_path, point.point_path);
        assert_eq!(iv.upper.point_path, point.point_path);
        assert_eq!(iv.crossings, 0);
        assert_eq!(interval_path("x", &[], &inputs, &point), Err(Error::NoBounds));
    }

    #[test]
    fn synthesize_checks() {
        let s = m(2023, 6);
        let c = synthesize("x", s, vec![2.0; 3], vec![2.0; 3], vec![2.0; 3], vec![1.5; 3]).unwrap();
        assert_eq!(c.trend_mean, vec![2.0; 3]);
        assert_eq!(c.point_path, vec![3.0; 3]);
        assert_eq!(synthesize("x", s, vec![1.0; 3], vec![-1.0; 3], vec![1.0; 3], vec![1.0; 3]), Err(Error::NonPositiveTrend(0)));
    }
}
