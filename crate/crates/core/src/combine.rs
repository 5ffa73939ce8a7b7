//! Model screening and forecast combination: simple average, inverse-MAPE
//! weights and non-negative lasso/ridge stacking without intercept.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::eval;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CombinationMethod {
    Simple,
    ErrorWeighted,
    StackLasso,
    StackRidge,
}

impl CombinationMethod {
    pub fn id(&self) -> &'static str {
        match self {
            CombinationMethod::Simple => "simple",
            CombinationMethod::ErrorWeighted => "error_weighted",
            CombinationMethod::StackLasso => "stack_lasso",
            CombinationMethod::StackRidge => "stack_ridge",
        }
    }
}

impl fmt::Display for CombinationMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for CombinationMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "simple" => CombinationMethod::Simple,
            "error_weighted" => CombinationMethod::ErrorWeighted,
            "stack_lasso" => CombinationMethod::StackLasso,
            "stack_ridge" => CombinationMethod::StackRidge,
            other => return Err(Error::InvalidSpec(format!("unknown combination method `{other}`"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CombinationSpec {
    pub method: CombinationMethod,
    pub lambda: f64,
    pub keep_fraction: f64,
}

impl Default for CombinationSpec {
    fn default() -> Self {
        Self { method: CombinationMethod::StackLasso, lambda: 1.0, keep_fraction: 0.8 }
    }
}

/// Non-negative weight per model id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CombinationWeights {
    pub weights: BTreeMap<String, f64>,
}

impl CombinationWeights {
    pub fn get(&self, id: &str) -> Option<f64> {
        self.weights.get(id).copied()
    }

    pub fn sum(&self) -> f64 {
        self.weights.values().sum()
    }
}

/// Number of models kept out of `k`: `floor(fraction * k)`, at least one.
pub fn retained_count(k: usize, keep_fraction: f64) -> usize {
    ((keep_fraction * k as f64 + 1e-9).floor() as usize).clamp(1, k.max(1))
}

/// Keeps the most accurate models by validation MASE. Non-finite scores are
/// dropped first; ties break on model id.
pub fn screen_models(table: &[(String, f64)], keep_fraction: f64) -> Result<Vec<String>> {
    if !(keep_fraction > 0.0 && keep_fraction <= 1.0) {
        return Err(Error::InvalidSpec(format!("keep fraction {keep_fraction} outside (0, 1]")));
    }
    let mut rows: Vec<&(String, f64)> = table.iter().filter(|(_, m)| m.is_finite()).collect();
    if rows.is_empty() {
        return Err(Error::EmptyTable);
    }
    rows.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
    let keep = retained_count(rows.len(), keep_fraction);
    Ok(rows.into_iter().take(keep).map(|(id, _)| id.clone()).collect())
}

/// Fits combination weights from validation-period forecasts (`forecasts[j]`
/// is model `ids[j]` over the same months as `actuals`).
pub fn fit_weights(ids: &[String], forecasts: &[Vec<f64>], actuals: &[f64], spec: &CombinationSpec) -> Result<CombinationWeights> {
    if ids.is_empty() {
        return Err(Error::EmptyTable);
    }
    if ids.len() != forecasts.len() {
        return Err(Error::ModelSetMismatch(format!("{} ids for {} forecast rows", ids.len(), forecasts.len())));
    }
    if let Some(f) = forecasts.iter().find(|f| f.len() != actuals.len()) {
        return Err(Error::LengthMismatch(f.len(), actuals.len()));
    }
    let w: Vec<f64> = match spec.method {
        CombinationMethod::Simple => vec![1.0 / ids.len() as f64; ids.len()],
        CombinationMethod::ErrorWeighted => inverse_mape(forecasts, actuals)?,
        CombinationMethod::StackLasso => stack(forecasts, actuals, spec.lambda, Penalty::Lasso)?.weights,
        CombinationMethod::StackRidge => stack(forecasts, actuals, spec.lambda, Penalty::Ridge)?.weights,
    };
    Ok(CombinationWeights { weights: ids.iter().cloned().zip(w).collect() })
}

fn inverse_mape(forecasts: &[Vec<f64>], actuals: &[f64]) -> Result<Vec<f64>> {
    let mapes: Vec<f64> = forecasts.iter().map(|f| eval::mape(f, actuals).map(|m| m.value)).collect::<Result<_>>()?;
    let exact = mapes.iter().filter(|m| **m == 0.0).count();
    if exact > 0 {
        return Ok(mapes.iter().map(|m| if *m == 0.0 { 1.0 / exact as f64 } else { 0.0 }).collect());
    }
    let inv: Vec<f64> = mapes.iter().map(|m| 1.0 / m).collect();
    let total: f64 = inv.iter().sum();
    Ok(inv.iter().map(|v| v / total).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Penalty {
    Lasso,
    Ridge,
}

/// `sum (y - X w)^2 + lambda * penalty(w)`.
pub fn stacking_objective(forecasts: &[Vec<f64>], actuals: &[f64], w: &[f64], lambda: f64, penalty: Penalty) -> f64 {
    let sse: f64 = actuals
        .iter()
        .enumerate()
        .map(|(t, y)| {
            let fit: f64 = forecasts.iter().zip(w).map(|(f, wj)| f[t] * wj).sum();
            (y - fit).powi(2)
        })
        .sum();
    let pen: f64 = match penalty {
        Penalty::Lasso => w.iter().map(|v| v.abs()).sum(),
        Penalty::Ridge => w.iter().map(|v| v * v).sum(),
    };
    sse + lambda * pen
}

#[derive(Debug, Clone, PartialEq)]
pub struct StackFit {
    pub weights: Vec<f64>,
    pub sweeps: usize,
    pub converged: bool,
    /// Objective after each sweep.
    pub trace: Vec<f64>,
}

const MAX_SWEEPS: usize = 10_000;
const TOLERANCE: f64 = 1e-10;

/// Cyclic coordinate descent for non-negative, intercept-free stacking on
/// unstandardised columns.
pub fn stack(forecasts: &[Vec<f64>], actuals: &[f64], lambda: f64, penalty: Penalty) -> Result<StackFit> {
    let k = forecasts.len();
    if k == 0 {
        return Err(Error::EmptyTable);
    }
    if !(lambda >= 0.0) {
        return Err(Error::InvalidSpec(format!("lambda {lambda} must be non-negative")));
    }
    if actuals.len() < k {
        return Err(Error::DegenerateDesign(format!("{} observations for {k} models", actuals.len())));
    }
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let gram: Vec<Vec<f64>> = forecasts.iter().map(|a| forecasts.iter().map(|b| dot(a, b)).collect()).collect();
    let xty: Vec<f64> = forecasts.iter().map(|f| dot(f, actuals)).collect();
    if let Some(j) = (0..k).find(|&j| !(gram[j][j] > 0.0)) {
        return Err(Error::DegenerateDesign(format!("forecast column {j} is all zero")));
    }

    let mut w = vec![0.0; k];
    let mut trace = Vec::new();
    let mut converged = false;
    let mut sweeps = 0;
    while sweeps < MAX_SWEEPS {
        sweeps += 1;
        let mut max_change: f64 = 0.0;
        for j in 0..k {
            let partial = xty[j] - (0..k).filter(|&i| i != j).map(|i| gram[j][i] * w[i]).sum::<f64>();
            let next = match penalty {
                Penalty::Lasso => (partial - lambda / 2.0).max(0.0) / gram[j][j],
                Penalty::Ridge => (partial / (gram[j][j] + lambda)).max(0.0),
            };
            max_change = max_change.max((next - w[j]).abs());
            w[j] = next;
        }
        trace.push(stacking_objective(forecasts, actuals, &w, lambda, penalty));
        if max_change < TOLERANCE {
            converged = true;
            break;
        }
    }
    Ok(StackFit { weights: w, sweeps, converged, trace })
}

/// Weighted sum of model paths; the model sets must match exactly.
pub fn combine(forecasts: &BTreeMap<String, Vec<f64>>, weights: &CombinationWeights) -> Result<Vec<f64>> {
    if forecasts.len() != weights.weights.len() || forecasts.keys().any(|k| !weights.weights.contains_key(k)) {
        let have: Vec<&String> = forecasts.keys().collect();
        let want: Vec<&String> = weights.weights.keys().collect();
        return Err(Error::ModelSetMismatch(format!("forecasts {have:?}, weights {want:?}")));
    }
    let h = forecasts.values().next().map_or(0, Vec::len);
    let mut out = vec![0.0; h];
    for (id, path) in forecasts {
        if path.len() != h {
            return Err(Error::LengthMismatch(path.len(), h));
        }
        let w = weights.weights[id];
        for (o, v) in out.iter_mut().zip(path) {
            *o += w * v;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("m{i}")).collect()
    }

    #[test]
    fn screening_counts() {
        let table: Vec<(String, f64)> = (0..17).map(|i| (format!("m{i:02}"), if i < 13 { 1.0 + i as f64 * 0.01 } else { 50.0 })).collect();
        let kept = screen_models(&table, 0.8).unwrap();
        assert_eq!(kept.len(), 13);
        assert!(kept.iter().all(|id| id.as_str() < "m13"));

        let equal: Vec<(String, f64)> = ["e", "d", "c", "b", "a"].iter().map(|s| (s.to_string(), 1.0)).collect();
        assert_eq!(screen_models(&equal, 0.8).unwrap(), vec!["a", "b", "c", "d"]);
        assert_eq!(screen_models(&[("x".into(), 2.0)], 0.8).unwrap(), vec!["x"]);
        assert_eq!(screen_models(&[("x".into(), f64::NAN)], 0.8), Err(Error::EmptyTable));
    }

    #[test]
    fn simple_and_inverse_mape() {
        let f = vec![vec![1.0, 2.0], vec![1.0, 2.0]];
        let w = fit_weights(&ids(2), &f, &[1.0, 2.0], &CombinationSpec { method: CombinationMethod::Simple, ..Default::default() }).unwrap();
        assert_eq!(w.get("m0"), Some(0.5));
        // MAPE 0.1 and 0.3.
        let f = vec![vec![11.0], vec![13.0]];
        let w = fit_weights(&ids(2), &f, &[10.0], &CombinationSpec { method: CombinationMethod::ErrorWeighted, ..Default::default() }).unwrap();
        assert!((w.get("m0").unwrap() - 0.75).abs() < 1e-12);
        assert!((w.sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lasso_picks_the_exact_model() {
        let y: Vec<f64> = (0..30).map(|t| 100.0 + 10.0 * (t as f64 * 0.5).sin()).collect();
        let noise: Vec<f64> = (0..30).map(|t| 100.0 + 10.0 * (t as f64 * 1.7).cos()).collect();
        let fit = stack(&[y.clone(), noise], &y, 0.0, Penalty::Lasso).unwrap();
        assert!(fit.weights[0] >= 0.99 && fit.weights[1] < 0.01, "{:?}", fit.weights);
        assert!(fit.trace.windows(2).all(|p| p[1] <= p[0] + 1e-9 * p[0].abs().max(1.0)));
    }

    #[test]
    fn huge_lambda_zeroes_everything() {
        let y: Vec<f64> = (0..10).map(|t| t as f64 + 1.0).collect();
        for penalty in [Penalty::Lasso, Penalty::Ridge] {
            let fit = stack(&[y.clone(), y.iter().map(|v| v * 2.0).collect()], &y, 1e12, penalty).unwrap();
            assert!(fit.weights.iter().all(|w| *w >= 0.0));
            if penalty == Penalty::Lasso {
                assert!(fit.weights.iter().all(|w| *w == 0.0));
            }
        }
        assert!(matches!(stack(&[vec![0.0; 3]], &[1.0, 2.0, 3.0], 1.0, Penalty::Lasso), Err(Error::DegenerateDesign(_))));
    }

    #[test]
    fn combining_paths() {
        let mut fc = BTreeMap::new();
        fc.insert("a".to_string(), vec![1.0, 2.0]);
        fc.insert("b".to_string(), vec![5.0, 5.0]);
        let w = CombinationWeights { weights: [("a".to_string(), 1.0), ("b".to_string(), 0.0)].into() };
        assert_eq!(combine(&fc, &w).unwrap(), vec![1.0, 2.0]);
        let bad = CombinationWeights { weights: [("a".to_string(), 1.0)].into() };
        assert!(matches!(combine(&fc, &bad), Err(Error::ModelSetMismatch(_))));
    }
}
