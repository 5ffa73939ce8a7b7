//! Reference forecasts for the gap between the last observed arrivals and
//! the start of the recovery curve, driven by search-index and flight data.

mod forecast;

pub use forecast::{composite_path, exog_forecast, flight_forecast, ratio_forecast};

use crate::error::{Error, Result};
use crate::series::{MonthKey, MonthlySeries};
use crate::stats;

/// Minimum number of paired months for a lagged correlation.
pub const MIN_OVERLAP: usize = 12;
pub const DEFAULT_THRESHOLD: f64 = 0.6;
pub const DEFAULT_LAG: usize = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct KeywordSeries {
    pub keyword: String,
    pub series: MonthlySeries,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompositeIndex {
    pub destination: String,
    pub included_keywords: Vec<String>,
    /// Lagged correlation of every candidate keyword, in input order.
    pub correlations: Vec<(String, f64)>,
    pub series: MonthlySeries,
    pub lag: usize,
}

/// Pairs `(arrivals_t, index_{t-lag})` over months where both are observed.
fn lagged_pairs(arrivals: &MonthlySeries, index: &MonthlySeries, lag: usize) -> (Vec<f64>, Vec<f64>) {
    let mut a = Vec::new();
    let mut x = Vec::new();
    for i in 0..arrivals.len() {
        let month = arrivals.month_at(i);
        if let (Some(y), Some(v)) = (arrivals.values()[i], index.get(month.add(-(lag as i32)))) {
            a.push(y);
            x.push(v);
        }
    }
    (a, x)
}

/// Pearson correlation between arrivals and the index `lag` months earlier.
pub fn lagged_correlation(arrivals: &MonthlySeries, index: &MonthlySeries, lag: usize) -> Result<f64> {
    let (a, x) = lagged_pairs(arrivals, index, lag);
    if a.len() < MIN_OVERLAP {
        return Err(Error::InsufficientOverlap { lag, overlap: a.len() });
    }
    Ok(stats::pearson(&a, &x))
}

/// The lag in `0..=max_lag` with the highest correlation; ties go to the
/// smaller lag.
pub fn best_lag(arrivals: &MonthlySeries, index: &MonthlySeries, max_lag: usize) -> Result<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for lag in 0..=max_lag {
        let r = lagged_correlation(arrivals, index, lag)?;
        let r = if r.is_finite() { r } else { f64::NEG_INFINITY };
        if best.is_none_or(|(_, b)| r > b) {
            best = Some((lag, r));
        }
    }
    Ok(best.expect("at least lag 0 is evaluated"))
}

/// Sums the keywords whose lagged correlation with arrivals is at least
/// `threshold`. The composite is observed where every included keyword is.
pub fn build_composite(
    destination: &str,
    arrivals: &MonthlySeries,
    keywords: &[KeywordSeries],
    threshold: f64,
    lag: usize,
) -> Result<CompositeIndex> {
    let mut correlations = Vec::with_capacity(keywords.len());
    let mut included: Vec<&KeywordSeries> = Vec::new();
    for kw in keywords {
        let r = match lagged_correlation(arrivals, &kw.series, lag) {
            Ok(r) => r,
            Err(Error::InsufficientOverlap { .. }) => f64::NAN,
            Err(e) => return Err(e),
        };
        correlations.push((kw.keyword.clone(), r));
        if r >= threshold {
            included.push(kw);
        }
    }
    if included.is_empty() {
        return Err(Error::NoKeywordPasses { threshold });
    }
    let start = included.iter().map(|k| k.series.start()).min().expect("non-empty");
    let end = included.iter().map(|k| k.series.end()).max().expect("non-empty");
    let len = end.months_since(start) as usize + 1;
    let values: Vec<Option<f64>> = (0..len)
        .map(|i| {
            let month = start.add(i as i32);
            included.iter().map(|k| k.series.get(month)).sum::<Option<f64>>()
        })
        .collect();
    let series = MonthlySeries::new(format!("{destination} composite"), start, values)?;
    Ok(CompositeIndex {
        destination: destination.to_string(),
        included_keywords: included.iter().map(|k| k.keyword.clone()).collect(),
        correlations,
        series,
        lag,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceConfig {
    pub threshold: f64,
    pub lag: usize,
}

impl Default for ReferenceConfig {
    fn default() -> Self {
        Self { threshold: DEFAULT_THRESHOLD, lag: DEFAULT_LAG }
    }
}

/// Reference path and the branches it averages.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceForecast {
    /// Last observed arrivals month; the path starts the month after.
    pub origin: MonthKey,
    pub path: Vec<f64>,
    pub index_branch: Option<Vec<f64>>,
    pub flight_branch: Option<Vec<f64>>,
    pub composite: Option<CompositeIndex>,
    /// Fallbacks taken, in human-readable form.
    pub warnings: Vec<String>,
}

impl ReferenceForecast {
    pub fn at(&self, month: MonthKey) -> Option<f64> {
        let h = month.months_since(self.origin);
        (h >= 1 && h as usize <= self.path.len()).then(|| self.path[h as usize - 1])
    }
}

fn mean_paths(paths: &[&Vec<f64>]) -> Vec<f64> {
    let h = paths[0].len();
    (0..h).map(|t| paths.iter().map(|p| p[t]).sum::<f64>() / paths.len() as f64).collect()
}

/// Averages the search-index branch (itself the mean of the ratio and
/// exogenous-regressor strategies) and the flight-growth branch, using
/// whichever are available. `arrivals` must end at its last observed month.
pub fn reference_forecast(
    destination: &str,
    arrivals: &MonthlySeries,
    keywords: &[KeywordSeries],
    flights: Option<&MonthlySeries>,
    horizon: usize,
    cfg: &ReferenceConfig,
) -> Result<ReferenceForecast> {
    let origin = arrivals.last_observed().ok_or_else(|| Error::AllMissing(destination.to_string()))?;
    let arrivals = arrivals.through(origin)?;
    let mut warnings = Vec::new();

    let (composite, index_branch) = if keywords.is_empty() {
        warnings.push(format!("{destination}: no keyword data, index branch skipped"));
        (None, None)
    } else {
        match build_composite(destination, &arrivals, keywords, cfg.threshold, cfg.lag) {
            Ok(c) => {
                let ratio = ratio_forecast(&arrivals, &c.series, c.lag, horizon);
                let exog = exog_forecast(&arrivals, &c.series, c.lag, horizon);
                let branch = match (ratio, exog) {
                    (Ok(r), Ok(e)) => Some(mean_paths(&[&r, &e])),
                    (Ok(p), Err(e)) | (Err(e), Ok(p)) => {
                        warnings.push(format!("{destination}: index strategy failed ({e}), using the other"));
                        Some(p)
                    }
                    (Err(e), Err(_)) => {
                        warnings.push(format!("{destination}: index branch failed ({e})"));
                        None
                    }
                };
                (Some(c), branch)
            }
            Err(e) => {
                warnings.push(format!("{destination}: {e}, index branch skipped"));
                (None, None)
            }
        }
    };

    let flight_branch = match flights {
        None => {
            warnings.push(format!("{destination}: no flight data, flight branch skipped"));
            None
        }
        Some(f) => match flight_forecast(&arrivals, f, horizon) {
            Ok(p) => Some(p),
            Err(e) => {
                warnings.push(format!("{destination}: {e}, flight branch skipped"));
                None
            }
        },
    };

    let available: Vec<&Vec<f64>> = index_branch.iter().chain(flight_branch.iter()).collect();
    if available.is_empty() {
        return Err(Error::NoSignal(destination.to_string()));
    }
    let path = mean_paths(&available).into_iter().map(|v| v.max(0.0)).collect();
    Ok(ReferenceForecast { origin, path, index_branch, flight_branch, composite, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn month(y: i32, m: u32) -> MonthKey {
        MonthKey::new(y, m).unwrap()
    }

    fn arrivals(n: usize) -> MonthlySeries {
        let v: Vec<f64> = (0..n).map(|t| 100.0 + 30.0 * (t as f64 * 0.9).sin() + t as f64).collect();
        MonthlySeries::from_values("a", month(2018, 1), &v).unwrap()
    }

    fn shifted(a: &MonthlySeries, k: i32, scale: f64) -> MonthlySeries {
        let v: Vec<f64> = a.dense().unwrap().iter().map(|x| x * scale).collect();
        MonthlySeries::from_values("k", a.start().add(-k), &v).unwrap()
    }

    #[test]
    fn best_lag_finds_the_shift() {
        let a = arrivals(48);
        let (lag, r) = best_lag(&a, &shifted(&a, 1, 2.0), 6).unwrap();
        assert_eq!(lag, 1);
        assert!((r - 1.0).abs() < 1e-12);
        let (lag, _) = best_lag(&a, &shifted(&a, 3, 1.0), 6).unwrap();
        assert_eq!(lag, 3);
        let short = arrivals(10);
        assert!(matches!(best_lag(&short, &shifted(&short, 1, 1.0), 2), Err(Error::InsufficientOverlap { .. })));
    }

    #[test]
    fn composite_keeps_correlated_keywords() {
        let a = arrivals(48);
        let good = KeywordSeries { keyword: "good".into(), series: shifted(&a, 1, 0.5) };
        let anti: Vec<f64> = a.dense().unwrap().iter().map(|x| 500.0 - x).collect();
        let bad = KeywordSeries {
            keyword: "bad".into(),
            series: MonthlySeries::from_values("b", a.start().add(-1), &anti).unwrap(),
        };
        let c = build_composite("a", &a, &[good.clone(), bad.clone()], 0.6, 1).unwrap();
        assert_eq!(c.included_keywords, vec!["good"]);
        assert_eq!(c.series.values(), good.series.values());
        assert!(matches!(build_composite("a", &a, &[bad], 0.6, 1), Err(Error::NoKeywordPasses { .. })));
        let both = build_composite("a", &a, &[good.clone(), good], 0.6, 1).unwrap();
        assert_eq!(both.included_keywords.len(), 2);
    }

    #[test]
    fn reference_averages_branches() {
        let a = arrivals(48);
        let kw = KeywordSeries { keyword: "k".into(), series: shifted(&a, 1, 0.5) };
        let flights = MonthlySeries::from_values("f", a.start(), &vec![50.0; 53]).unwrap();
        let r = reference_forecast("a", &a, std::slice::from_ref(&kw), Some(&flights), 5, &ReferenceConfig::default()).unwrap();
        let (ib, fb) = (r.index_branch.clone().unwrap(), r.flight_branch.clone().unwrap());
        for t in 0..5 {
            assert!((r.path[t] - 0.5 * (ib[t] + fb[t])).abs() < 1e-9);
            assert!(r.path[t] >= ib[t].min(fb[t]) - 1e-9 && r.path[t] <= ib[t].max(fb[t]) + 1e-9);
        }
        let only_index = reference_forecast("a", &a, &[kw], None, 5, &ReferenceConfig::default()).unwrap();
        assert_eq!(only_index.path, only_index.index_branch.clone().unwrap());
        assert_eq!(only_index.warnings.len(), 1);
        assert!(matches!(reference_forecast("a", &a, &[], None, 5, &ReferenceConfig::default()), Err(Error::NoSignal(_))));
    }
}
