//! Hierarchical forecasting methods that produce bottom-level forecasts for
//! every destination from a single geographic tree.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{
    forecast_proportions, historical_proportions, mint_g, shrinkage_covariance, wls_g, GMatrix, Hierarchy,
};
use crate::error::{Error, Result};
use crate::models::{fit_forecast_detailed, ArimaConfig, ForecastResult, ModelOutput, ModelSpec};
use crate::series::MonthlySeries;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum HierarchicalMethod {
    /// Top-down with per-step proportions from individual ARIMA forecasts.
    TdAArima,
    /// Top-down with per-step proportions from individual ETS forecasts.
    TdAEts,
    /// Top-down ARIMA with historical proportions.
    TdBArima,
    /// Top-down ETS with historical proportions.
    TdBEts,
    Mint,
    Wls,
}

impl HierarchicalMethod {
    pub const ALL: [HierarchicalMethod; 6] = [
        HierarchicalMethod::TdAArima,
        HierarchicalMethod::TdAEts,
        HierarchicalMethod::TdBArima,
        HierarchicalMethod::TdBEts,
        HierarchicalMethod::Mint,
        HierarchicalMethod::Wls,
    ];

    pub fn id(&self) -> &'static str {
        match self {
            HierarchicalMethod::TdAArima => "td_a_arima",
            HierarchicalMethod::TdAEts => "td_a_ets",
            HierarchicalMethod::TdBArima => "td_b_arima",
            HierarchicalMethod::TdBEts => "td_b_ets",
            HierarchicalMethod::Mint => "mint",
            HierarchicalMethod::Wls => "wls",
        }
    }
}

impl fmt::Display for HierarchicalMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for HierarchicalMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.id() == s)
            .ok_or_else(|| Error::InvalidSpec(format!("unknown hierarchical method `{s}`")))
    }
}

/// Bottom-level forecasts keyed by destination.
pub type HierarchicalOutput = BTreeMap<String, ForecastResult>;

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Base {
    Arima,
    Ets,
}

struct Fits {
    /// Per node index, per base family.
    outputs: BTreeMap<(Base, usize), Result<ModelOutput>>,
}

impl Fits {
    fn get(&self, base: Base, node: usize) -> Result<&ModelOutput> {
        match self.outputs.get(&(base, node)) {
            Some(Ok(o)) => Ok(o),
            Some(Err(e)) => Err(e.clone()),
            None => Err(Error::InvalidSpec("base fit not computed".into())),
        }
    }

    fn sd(&self, base: Base, node: usize) -> Result<Vec<f64>> {
        let out = self.get(base, node)?;
        out.sd.clone().ok_or_else(|| Error::InvalidSpec("base model has no interval".into()))
    }
}

fn spec(base: Base) -> ModelSpec {
    match base {
        Base::Arima => ModelSpec::Arima(ArimaConfig::default()),
        Base::Ets => ModelSpec::Ets,
    }
}

/// Fits the base models each method needs once and reconciles them.
/// `leaves` must hold one complete series per bottom-level node, all on the
/// same months. Failures are reported per method.
pub fn hierarchical_forecasts(
    hierarchy: &Hierarchy,
    leaves: &BTreeMap<String, MonthlySeries>,
    methods: &[HierarchicalMethod],
    horizon: usize,
) -> Result<BTreeMap<HierarchicalMethod, Result<HierarchicalOutput>>> {
    let missing = |name: &str| Error::ShapeMismatch(format!("no series for leaf `{name}`"));
    let first = leaves.get(&hierarchy.leaves()[0]).ok_or_else(|| missing(&hierarchy.leaves()[0]))?;
    let (start, len) = (first.start(), first.len());
    let mut history = DMatrix::zeros(hierarchy.m(), len);
    for (i, name) in hierarchy.leaves().iter().enumerate() {
        let s = leaves.get(name).ok_or_else(|| missing(name))?;
        if s.start() != start || s.len() != len {
            return Err(Error::ShapeMismatch(format!("`{name}` does not cover the same months")));
        }
        for (t, v) in s.dense()?.into_iter().enumerate() {
            history[(i, t)] = v;
        }
    }
    let all = hierarchy.aggregate(&history)?;
    let node_series = |i: usize| -> Result<MonthlySeries> {
        let values: Vec<f64> = all.row(i).iter().copied().collect();
        MonthlySeries::from_values(hierarchy.nodes()[i].clone(), start, &values)
    };

    let n = hierarchy.n();
    let leaf_nodes: Vec<usize> = (n - hierarchy.m()..n).collect();
    let mut wanted: Vec<(Base, usize)> = Vec::new();
    for m in methods {
        match m {
            HierarchicalMethod::TdAArima => {
                wanted.push((Base::Arima, 0));
                wanted.extend(leaf_nodes.iter().map(|&i| (Base::Arima, i)));
            }
            HierarchicalMethod::TdAEts => {
                wanted.push((Base::Ets, 0));
                wanted.extend(leaf_nodes.iter().map(|&i| (Base::Ets, i)));
            }
            HierarchicalMethod::TdBArima => wanted.push((Base::Arima, 0)),
            HierarchicalMethod::TdBEts => wanted.push((Base::Ets, 0)),
            HierarchicalMethod::Mint | HierarchicalMethod::Wls => wanted.extend((0..n).map(|i| (Base::Ets, i))),
        }
    }
    wanted.sort();
    wanted.dedup();
    let mut fits = Fits { outputs: BTreeMap::new() };
    for (base, node) in wanted {
        let series = node_series(node)?;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        fits.outputs.insert((base, node), fit_forecast_detailed(&series, &spec(base), horizon, &mut rng));
    }

    let origin = first.end();
    let leaf_names = hierarchy.leaves();
    let emit = |method: HierarchicalMethod, mean: &DMatrix<f64>, sd: &DMatrix<f64>| -> Result<HierarchicalOutput> {
        leaf_names
            .iter()
            .enumerate()
            .map(|(i, name)| {
                let m: Vec<f64> = mean.row(i).iter().copied().collect();
                let s: Vec<f64> = sd.row(i).iter().copied().collect();
                Ok((name.clone(), ForecastResult::from_sd(origin, method.id(), m, Some(s))?))
            })
            .collect()
    };

    let top_down = |method: HierarchicalMethod, base: Base, from_forecasts: bool| -> Result<HierarchicalOutput> {
        let top = fits.get(base, 0)?;
        let top_sd = fits.sd(base, 0)?;
        let props: Vec<Vec<f64>> = if from_forecasts {
            let mut leaf = DMatrix::zeros(hierarchy.m(), horizon);
            for (i, &node) in leaf_nodes.iter().enumerate() {
                for (k, v) in fits.get(base, node)?.raw_mean.iter().enumerate() {
                    leaf[(i, k)] = *v;
                }
            }
            forecast_proportions(&leaf)?
        } else {
            vec![historical_proportions(&history)?; horizon]
        };
        let mean = DMatrix::from_fn(hierarchy.m(), horizon, |i, k| props[k][i] * top.raw_mean[k]);
        let sd = DMatrix::from_fn(hierarchy.m(), horizon, |i, k| props[k][i] * top_sd[k]);
        emit(method, &mean, &sd)
    };

    let optimal = |method: HierarchicalMethod| -> Result<HierarchicalOutput> {
        let mut base = DMatrix::zeros(n, horizon);
        let mut var = DMatrix::zeros(n, horizon);
        let mut resid = DMatrix::zeros(n, len);
        for i in 0..n {
            let out = fits.get(Base::Ets, i)?;
            let sd = fits.sd(Base::Ets, i)?;
            for k in 0..horizon {
                base[(i, k)] = out.raw_mean[k];
                var[(i, k)] = sd[k] * sd[k];
            }
            for (t, r) in out.residuals.iter().enumerate().take(len) {
                resid[(i, t)] = *r;
            }
        }
        let (w, _) = shrinkage_covariance(&resid)?;
        let GMatrix(g) = if method == HierarchicalMethod::Mint { mint_g(hierarchy, &w)? } else { wls_g(hierarchy, &w)? };
        let mean = &g * &base;
        // Reconciled variance from independent base errors.
        let g2 = g.map(|v| v * v);
        let sd = (&g2 * &var).map(f64::sqrt);
        emit(method, &mean, &sd)
    };

    Ok(methods
        .iter()
        .map(|&m| {
            let out = match m {
                HierarchicalMethod::TdAArima => top_down(m, Base::Arima, true),
                HierarchicalMethod::TdAEts => top_down(m, Base::Ets, true),
                HierarchicalMethod::TdBArima => top_down(m, Base::Arima, false),
                HierarchicalMethod::TdBEts => top_down(m, Base::Ets, false),
                HierarchicalMethod::Mint | HierarchicalMethod::Wls => optimal(m),
            };
            (m, out)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::MonthKey;

    #[test]
    fn all_methods_on_a_small_tree() {
        let h = Hierarchy::new(
            "Total",
            &[("R1".into(), vec!["a".into(), "b".into()]), ("R2".into(), vec!["c".into()])],
        )
        .unwrap();
        let start = MonthKey::new(2012, 1).unwrap();
        let make = |name: &str, level: f64, phase: f64| {
            let v: Vec<f64> = (0..72)
                .map(|t| {
                    let tf = t as f64;
                    level * (1.0 + 0.01 * tf) * (1.0 + 0.2 * (tf * std::f64::consts::PI / 6.0 + phase).sin())
                        + (tf * 1.3 + phase).sin()
                })
                .collect();
            (name.to_string(), MonthlySeries::from_values(name, start, &v).unwrap())
        };
        let leaves: BTreeMap<_, _> = [make("a", 100.0, 0.0), make("b", 50.0, 0.5), make("c", 20.0, 1.0)].into();
        let out = hierarchical_forecasts(&h, &leaves, &HierarchicalMethod::ALL, 6).unwrap();
        for (method, result) in &out {
            let fc = result.as_ref().unwrap_or_else(|e| panic!("{method}: {e}"));
            assert_eq!(fc.len(), 3);
            let a = &fc["a"];
            assert_eq!(a.model_id, method.id());
            assert_eq!(a.horizon(), 6);
            assert!(a.has_bounds());
            assert!(a.mean.iter().all(|v| *v > 50.0 && *v < 250.0), "{method}: {:?}", a.mean);
        }
    }

    #[test]
    fn method_ids_round_trip() {
        for m in HierarchicalMethod::ALL {
            assert_eq!(m.id().parse::<HierarchicalMethod>().unwrap(), m);
        }
    }
}
