//! Synthetic dataset with a structural break and a parameterised recovery.
//!
//! Each destination has a counterfactual path `level * growth^t * seasonal`
//! times lognormal noise. After the break month arrivals collapse to a small
//! fraction of the counterfactual; from the reopening month the fraction
//! rises to `suppression` at the end of recovery and stays there. Keyword
//! volumes lead arrivals by one month; flight counts track the recovery
//! fraction for a subset of destinations.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rise_core::MonthKey;

use crate::error::{CliError, Result};
use crate::rng::substream;

/// `(region, [(destination, policy, distance, recovery, r)])` from the
/// published score table.
/// `(destination, policy, distance, recovery, r)`.
pub type ScoredDestination = (&'static str, u8, u8, u8, f64);

pub const DESTINATION_TREE: [(&str, &[ScoredDestination]); 6] = [
    ("America", &[("Canada", 3, 1, 2, 0.65), ("Chile", 3, 1, 3, 0.7), ("Mexico", 5, 1, 5, 1.0), ("USA", 2, 1, 3, 0.65)]),
    (
        "East Asia",
        &[
            ("Chinese Taipei", 1, 5, 1, 0.6),
            ("Hong Kong", 5, 5, 3, 0.85),
            ("Macao", 5, 5, 3, 0.85),
            ("Korea (ROK)", 4, 5, 2, 0.8),
            ("Japan", 4, 5, 2, 0.8),
        ],
    ),
    (
        "Southeast Asia",
        &[
            ("Thailand", 5, 3, 4, 0.8),
            ("Cambodia", 5, 3, 3, 0.8),
            ("Indonesia", 4, 3, 4, 0.8),
            ("Singapore", 4, 3, 3, 0.8),
            ("Maldives", 4, 3, 5, 0.8),
        ],
    ),
    ("Pacific", &[("New Zealand", 3, 1, 3, 0.7), ("Australia", 4, 2, 3, 0.75), ("Hawaii", 3, 2, 4, 0.75)]),
    ("West Asia", &[("Turkey", 4, 2, 3, 0.75)]),
    ("Europe", &[("Austria", 2, 2, 2, 0.65), ("Czech Republic", 2, 2, 2, 0.65)]),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecoveryShape {
    Linear,
    /// Slow start, fast finish.
    Quadratic,
    Logistic,
}

impl RecoveryShape {
    /// Fraction of the recovery completed at `u` in `[0, 1]`.
    fn progress(self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        match self {
            RecoveryShape::Linear => u,
            RecoveryShape::Quadratic => u * u,
            RecoveryShape::Logistic => {
                let s = |x: f64| 1.0 / (1.0 + (-10.0 * (x - 0.5)).exp());
                (s(u) - s(0.0)) / (s(1.0) - s(0.0))
            }
        }
    }
}

impl fmt::Display for RecoveryShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RecoveryShape::Linear => "linear",
            RecoveryShape::Quadratic => "quadratic",
            RecoveryShape::Logistic => "logistic",
        })
    }
}

impl FromStr for RecoveryShape {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(RecoveryShape::Linear),
            "quadratic" => Ok(RecoveryShape::Quadratic),
            "logistic" => Ok(RecoveryShape::Logistic),
            other => Err(CliError::Config(format!("unknown recovery shape `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub destinations: usize,
    pub start: MonthKey,
    /// Observed history runs `years * 12` months past `start`, inclusive.
    pub years: u32,
    pub break_month: MonthKey,
    pub reopen_month: MonthKey,
    pub recovery_end: MonthKey,
    /// Last month of the held-out actuals.
    pub actuals_end: MonthKey,
    /// Last month of keyword and flight data.
    pub signal_end: MonthKey,
    pub recovery_shape: RecoveryShape,
    /// Recovery fraction reached at `recovery_end`.
    pub suppression: f64,
    /// Multiplier on the seasonal amplitude; 0 gives no seasonality.
    pub seasonality: f64,
    /// Lognormal noise scale on arrivals.
    pub noise: f64,
    /// Probability that a pre-break arrivals month is missing.
    pub missing_rate: f64,
    pub flight_destinations: usize,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        let m = |y, mo| MonthKey::new(y, mo).expect("valid month");
        Self {
            destinations: 20,
            start: m(2015, 1),
            years: 8,
            break_month: m(2020, 2),
            reopen_month: m(2023, 1),
            recovery_end: m(2024, 7),
            actuals_end: m(2024, 12),
            signal_end: m(2023, 6),
            recovery_shape: RecoveryShape::Linear,
            suppression: 0.7,
            seasonality: 1.0,
            noise: 0.04,
            missing_rate: 0.02,
            flight_destinations: 16,
        }
    }
}

impl SyntheticSpec {
    pub fn data_end(&self) -> MonthKey {
        self.start.add(self.years as i32 * 12)
    }

    pub fn validate(&self) -> Result<()> {
        let ordered = self.start < self.break_month
            && self.break_month <= self.reopen_month
            && self.reopen_month < self.recovery_end
            && self.recovery_end <= self.actuals_end
            && self.data_end() <= self.actuals_end
            && self.signal_end < self.actuals_end;
        if !ordered {
            return Err(CliError::Config(
                "synthetic spec needs start < break <= reopen < recovery end <= actuals end, with data and signals ending before the actuals".into(),
            ));
        }
        if self.destinations == 0
            || !(self.suppression > 0.0 && self.suppression <= 1.0)
            || !(self.seasonality >= 0.0)
            || !(self.noise >= 0.0)
            || !(0.0..1.0).contains(&self.missing_rate)
        {
            return Err(CliError::Config("synthetic spec has an out-of-range parameter".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DestinationTruth {
    pub name: String,
    pub region: String,
    pub scores: (u8, u8, u8),
    pub table_r: f64,
    pub counterfactual: Vec<f64>,
    pub fraction: Vec<f64>,
    /// Arrivals from `start` to `actuals_end`, fully observed.
    pub arrivals: Vec<f64>,
    /// Indices (from `start`) hidden in the published history.
    pub missing: Vec<usize>,
    /// `(keyword, volumes from start to signal_end)`.
    pub keywords: Vec<(String, Vec<f64>)>,
    /// Flights from `flight_start` to `signal_end`.
    pub flights: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub spec: SyntheticSpec,
    pub seed: u64,
    pub flight_start: MonthKey,
    pub destinations: Vec<DestinationTruth>,
}

type RosterEntry = (String, String, (u8, u8, u8), f64);

fn roster(n: usize) -> Vec<RosterEntry> {
    let mut out: Vec<_> = DESTINATION_TREE
        .iter()
        .flat_map(|(region, dests)| dests.iter().map(move |&(d, p, di, r, coef)| (d.to_string(), region.to_string(), (p, di, r), coef)))
        .take(n)
        .collect();
    for i in out.len()..n {
        out.push((format!("Destination {}", i + 1), "Other".into(), (3, 3, 3), 0.75));
    }
    out
}

fn lognormal<R: Rng>(rng: &mut R, sigma: f64) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    (sigma * z - 0.5 * sigma * sigma).exp()
}

pub fn generate(spec: &SyntheticSpec, seed: u64) -> Result<SyntheticData> {
    spec.validate()?;
    let len = spec.actuals_end.months_since(spec.start) as usize + 1;
    let flight_start = spec.break_month.add(-13).max(spec.start);
    let roster = roster(spec.destinations);

    let mut order: Vec<usize> = (0..roster.len()).collect();
    order.shuffle(&mut substream(seed, "generate/flights"));
    let with_flights: Vec<bool> = {
        let mut v = vec![false; roster.len()];
        for &i in order.iter().take(spec.flight_destinations) {
            v[i] = true;
        }
        v
    };

    let destinations = roster
        .into_iter()
        .zip(with_flights)
        .map(|((name, region, scores, table_r), flights)| {
            let mut rng = substream(seed, &format!("generate/{name}"));
            let level = (rng.random_range(2_000f64.ln()..200_000f64.ln())).exp();
            let growth = rng.random_range(0.0f64..0.05);
            let amp = rng.random_range(0.10..0.35) * spec.seasonality;
            let (p1, p2): (f64, f64) = (rng.random_range(0.0..std::f64::consts::TAU), rng.random_range(0.0..std::f64::consts::TAU));
            let a2 = rng.random_range(0.0..0.5);
            let raw_season: Vec<f64> = (0..12)
                .map(|m| {
                    let x = std::f64::consts::TAU * m as f64 / 12.0;
                    (amp * ((x + p1).sin() + a2 * (2.0 * x + p2).sin())).exp()
                })
                .collect();
            let mean_season = raw_season.iter().sum::<f64>() / 12.0;
            let collapse = rng.random_range(0.01..0.05);
            let reopen_level = rng.random_range(0.08f64..0.20).min(spec.suppression);

            let span = spec.recovery_end.months_since(spec.reopen_month) as f64;
            let mut counterfactual = Vec::with_capacity(len);
            let mut fraction = Vec::with_capacity(len);
            let mut arrivals = Vec::with_capacity(len);
            for t in 0..len {
                let month = spec.start.add(t as i32);
                let season = raw_season[month.month() as usize - 1] / mean_season;
                let cf = level * (1.0 + growth).powf(t as f64 / 12.0) * season;
                let rho = if month < spec.break_month {
                    1.0
                } else if month < spec.reopen_month {
                    collapse
                } else {
                    let u = month.months_since(spec.reopen_month) as f64 / span;
                    reopen_level + (spec.suppression - reopen_level) * spec.recovery_shape.progress(u)
                };
                counterfactual.push(cf);
                fraction.push(rho);
                arrivals.push((cf * rho * lognormal(&mut rng, spec.noise)).round().max(1.0));
            }

            let hole_end = spec.break_month.months_since(spec.start) as usize;
            let missing: Vec<usize> = (1..hole_end).filter(|_| rng.random_bool(spec.missing_rate)).collect();

            let kw_len = spec.signal_end.months_since(spec.start) as usize + 1;
            let mut keywords = Vec::new();
            for term in ["travel", "visa", "hotel", "food"].iter().take(rng.random_range(2..=4)) {
                let scale = rng.random_range(0.2..2.0);
                let sigma = rng.random_range(0.03..0.12);
                let v = (0..kw_len).map(|t| (scale * arrivals[t + 1] * lognormal(&mut rng, sigma)).round().max(0.0)).collect();
                keywords.push((format!("{name} {term}"), v));
            }
            if rng.random_bool(0.5) {
                let base = rng.random_range(100.0..1000.0);
                let v = (0..kw_len).map(|_| (base * lognormal(&mut rng, 0.3)).round()).collect();
                keywords.push((format!("{name} weather"), v));
            }

            let flights = flights.then(|| {
                let capacity = rng.random_range(50.0..500.0);
                let first = flight_start.months_since(spec.start) as usize;
                (first..kw_len).map(|t| (capacity * fraction[t].powf(0.9) * lognormal(&mut rng, 0.05)).round().max(1.0)).collect()
            });

            DestinationTruth {
                name,
                region,
                scores,
                table_r,
                counterfactual,
                fraction,
                arrivals,
                missing,
                keywords,
                flights,
            }
        })
        .collect();

    Ok(SyntheticData { spec: spec.clone(), seed, flight_start, destinations })
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(|e| CliError::Io { path: path.to_path_buf(), message: e.to_string() })
}

fn finish(path: &Path, w: csv::Writer<fs::File>) -> Result<()> {
    w.into_inner()
        .map_err(|e| CliError::Io { path: path.to_path_buf(), message: e.to_string() })?
        .sync_all()
        .map_err(CliError::io(path))
}

macro_rules! row {
    ($w:expr, $path:expr, $($field:expr),+ $(,)?) => {
        $w.write_record([$($field.to_string()),+])
            .map_err(|e| CliError::Io { path: $path.to_path_buf(), message: e.to_string() })?
    };
}

impl SyntheticData {
    /// Writes `data/*.csv` and a ready-to-run `rise.toml` under `dir`;
    /// returns the written paths.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let data = dir.join("data");
        fs::create_dir_all(&data).map_err(CliError::io(&data))?;
        let spec = &self.spec;
        let data_len = spec.data_end().months_since(spec.start) as usize + 1;
        let month = |t: usize| spec.start.add(t as i32);
        let mut written = Vec::new();

        let path = data.join("arrivals.csv");
        let mut w = csv_writer(&path)?;
        row!(w, path, "destination", "year", "month", "arrivals");
        for d in &self.destinations {
            for t in 0..data_len {
                let m = month(t);
                let v = if d.missing.contains(&t) { String::new() } else { d.arrivals[t].to_string() };
                row!(w, path, d.name, m.year(), m.month(), v);
            }
        }
        finish(&path, w)?;
        written.push(path);

        let path = data.join("actuals.csv");
        let mut w = csv_writer(&path)?;
        row!(w, path, "destination", "year", "month", "arrivals");
        for d in &self.destinations {
            for (t, v) in d.arrivals.iter().enumerate() {
                let m = month(t);
                row!(w, path, d.name, m.year(), m.month(), v);
            }
        }
        finish(&path, w)?;
        written.push(path);

        let path = data.join("truth.csv");
        let mut w = csv_writer(&path)?;
        row!(w, path, "destination", "year", "month", "counterfactual", "recovery_fraction", "arrivals");
        for d in &self.destinations {
            for t in 0..d.arrivals.len() {
                let m = month(t);
                row!(w, path, d.name, m.year(), m.month(), d.counterfactual[t], d.fraction[t], d.arrivals[t]);
            }
        }
        finish(&path, w)?;
        written.push(path);

        let path = data.join("keywords.csv");
        let mut w = csv_writer(&path)?;
        row!(w, path, "destination", "keyword", "year", "month", "volume");
        for d in &self.destinations {
            for (kw, values) in &d.keywords {
                for (t, v) in values.iter().enumerate() {
                    let m = month(t);
                    row!(w, path, d.name, kw, m.year(), m.month(), v);
                }
            }
        }
        finish(&path, w)?;
        written.push(path);

        let path = data.join("flights.csv");
        let mut w = csv_writer(&path)?;
        row!(w, path, "destination", "year", "month", "flights");
        for d in &self.destinations {
            if let Some(f) = &d.flights {
                for (t, v) in f.iter().enumerate() {
                    let m = self.flight_start.add(t as i32);
                    row!(w, path, d.name, m.year(), m.month(), v);
                }
            }
        }
        finish(&path, w)?;
        written.push(path);

        let path = data.join("scores.csv");
        let mut w = csv_writer(&path)?;
        row!(w, path, "destination", "policy", "distance", "recovery", "r");
        for d in &self.destinations {
            row!(w, path, d.name, d.scores.0, d.scores.1, d.scores.2, d.table_r);
        }
        finish(&path, w)?;
        written.push(path);

        let path = dir.join("rise.toml");
        fs::write(&path, self.config_text()).map_err(CliError::io(&path))?;
        written.push(path);
        Ok(written)
    }

    /// Default pipeline config for this dataset, paths relative to its
    /// directory.
    pub fn config_text(&self) -> String {
        let mut regions: BTreeMap<usize, (String, Vec<String>)> = BTreeMap::new();
        let mut order: Vec<String> = Vec::new();
        for d in &self.destinations {
            let idx = match order.iter().position(|r| *r == d.region) {
                Some(i) => i,
                None => {
                    order.push(d.region.clone());
                    order.len() - 1
                }
            };
            regions.entry(idx).or_insert_with(|| (d.region.clone(), Vec::new())).1.push(d.name.clone());
        }
        let quote = |v: &[String]| v.iter().map(|s| format!("{s:?}")).collect::<Vec<_>>().join(", ");
        let mut tree = String::new();
        for (name, members) in regions.values() {
            tree.push_str(&format!("\n[[hierarchy.region]]\nname = {name:?}\nmembers = [{}]\n", quote(members)));
        }
        format!(
            r#"# Generated by `rise generate` (seed {seed}).
config_version = 1
seed = {seed}
output_dir = "output"

[data]
arrivals = "data/arrivals.csv"
keywords = "data/keywords.csv"
flights = "data/flights.csv"
scores = "data/scores.csv"
actuals = "data/actuals.csv"

[hierarchy]
root = "Total"
{tree}
[split]
train_end = "2017-12"
validation_end = "2019-12"
horizon = 24
relabel_months = 36

[base]
models = ["snaive", "drift", "arima", "ses", "holt", "hw", "stl_a", "stl_b", "stl_c", "bchw", "nnar"]
hierarchical = ["td_a_arima", "td_a_ets", "td_b_arima", "td_b_ets", "mint", "wls"]

[combination]
method = "stack_lasso"
lambda = 1.0
keep_fraction = 0.8

[reference]
threshold = 0.6
lag = 1

[recovery]
history_start = "2022-01"
initial = "2023-06"
terminal = "2024-07"
logistic_months = ["2023-12", "2024-12"]
terminal_weight = 18.0
seasonal = "log_rescaled"
coefficient = "table"

[evaluate]
start = "2023-08"
end = "2024-07"
alpha = 0.2
season = 12
benchmarks = ["snaive", "arima", "ets"]
"#,
            seed = self.seed,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes_run_from_zero_to_one() {
        for s in [RecoveryShape::Linear, RecoveryShape::Quadratic, RecoveryShape::Logistic] {
            assert!(s.progress(0.0).abs() < 1e-12, "{s}");
            assert!((s.progress(1.0) - 1.0).abs() < 1e-12, "{s}");
            assert!(s.progress(0.3) < s.progress(0.6), "{s}");
            assert_eq!(s.to_string().parse::<RecoveryShape>().unwrap(), s);
        }
    }

    #[test]
    fn generated_structure() {
        let spec = SyntheticSpec::default();
        let data = generate(&spec, 11).unwrap();
        assert_eq!(data.destinations.len(), 20);
        assert_eq!(data.destinations.iter().filter(|d| d.flights.is_some()).count(), 16);
        let d = &data.destinations[0];
        assert_eq!(d.arrivals.len(), spec.actuals_end.months_since(spec.start) as usize + 1);
        let end = spec.recovery_end.months_since(spec.start) as usize;
        assert!((d.fraction[end] - spec.suppression).abs() < 1e-12);
        let reopen = spec.reopen_month.months_since(spec.start) as usize;
        let mid = (reopen + end) / 2;
        let expect = 0.5 * (d.fraction[reopen] + d.fraction[end]);
        assert!((d.fraction[mid] - expect).abs() < 0.05, "linear recovery");
        assert!(d.missing.iter().all(|&t| t > 0 && spec.start.add(t as i32) < spec.break_month));
        assert_eq!(generate(&spec, 11).unwrap(), data);
        assert_ne!(generate(&spec, 12).unwrap(), data);
    }

    #[test]
    fn zero_seasonality_is_flat() {
        let spec = SyntheticSpec { seasonality: 0.0, noise: 0.0, destinations: 1, ..Default::default() };
        let d = &generate(&spec, 1).unwrap().destinations[0];
        let year: Vec<f64> = d.counterfactual[..12].to_vec();
        for w in year.windows(2) {
            assert!(w[1] > w[0], "pure growth without a seasonal swing");
        }
    }

    #[test]
    fn bad_spec_is_rejected() {
        let spec = SyntheticSpec { suppression: 1.5, ..Default::default() };
        assert!(generate(&spec, 1).is_err());
        let spec = SyntheticSpec { reopen_month: MonthKey::new(2019, 1).unwrap(), ..Default::default() };
        assert!(generate(&spec, 1).is_err());
    }
}
