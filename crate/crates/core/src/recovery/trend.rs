//! Trend shapes joining the initial and terminal points of a recovery curve.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::linalg;

/// `T0 + (t / steps) (T_end - T0)` for `t = 0..steps`. With the default 14
/// steps the last value stops short of the terminal.
pub fn trend_linear(initial: f64, terminal: f64, steps: usize) -> Vec<f64> {
    let d = steps as f64;
    (0..steps).map(|t| initial + (t as f64 / d) * (terminal - initial)).collect()
}

/// `q(s) = a s^2 + b s + c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadratic {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Quadratic {
    pub fn eval(&self, s: f64) -> f64 {
        (self.a * s + self.b) * s + self.c
    }
}

/// Condition number of the normal equations above which the fallback
/// solver is used.
pub const MAX_CONDITION: f64 = 1e12;

/// Weighted least-squares quadratic through `(argument, value, weight)`.
/// The normal equations are used directly when well conditioned; otherwise
/// the square-root-weighted design is solved on centred, scaled arguments.
pub fn fit_quadratic(points: &[(f64, f64, f64)]) -> Result<Quadratic> {
    let mut xtx = Matrix3::zeros();
    let mut xty = Vector3::zeros();
    for &(s, y, w) in points {
        let row = Vector3::new(s * s, s, 1.0);
        xtx += w * row * row.transpose();
        xty += w * y * row;
    }
    let normal = DMatrix::from_column_slice(3, 3, xtx.as_slice());
    let cond = linalg::condition_number(&normal);
    if cond <= MAX_CONDITION {
        if let Some(beta) = linalg::solve_vec(&normal, &DVector::from_column_slice(xty.as_slice())) {
            return Ok(Quadratic { a: beta[0], b: beta[1], c: beta[2] });
        }
    }
    let total: f64 = points.iter().map(|p| p.2).sum();
    let centre = points.iter().map(|p| p.0 * p.2).sum::<f64>() / total;
    let spread = points.iter().map(|p| (p.0 - centre).abs()).fold(0.0, f64::max).max(1.0);
    let n = points.len();
    let design = DMatrix::from_fn(n, 3, |i, j| {
        let u = (points[i].0 - centre) / spread;
        points[i].2.sqrt() * [u * u, u, 1.0][j]
    });
    let rhs = DVector::from_fn(n, |i, _| points[i].2.sqrt() * points[i].1);
    let svd = design.svd(true, true);
    let sv = &svd.singular_values;
    let (max, min) = (sv.max(), sv.min());
    if !(min > RANK_EPS * max) {
        return Err(Error::IllConditioned(cond));
    }
    let beta = svd.solve(&rhs, 0.0).map_err(|_| Error::IllConditioned(cond))?;
    // Expand a u^2 + b u + c with u = (s - m) / d back to the raw argument.
    let (a, b, c) = (beta[0] / (spread * spread), beta[1] / spread, beta[2]);
    Ok(Quadratic { a, b: b - 2.0 * a * centre, c: a * centre * centre - b * centre + c })
}

const RANK_EPS: f64 = 1e-14;

/// Quadratic trend: unit-weight history points plus a weighted terminal
/// point, evaluated at `offset + t` for `t = 0..steps`.
pub fn trend_quadratic(
    history: &[(f64, f64)],
    terminal: (f64, f64),
    terminal_weight: f64,
    offset: f64,
    steps: usize,
) -> Result<(Quadratic, Vec<f64>)> {
    let mut points: Vec<(f64, f64, f64)> = history.iter().map(|&(s, y)| (s, y, 1.0)).collect();
    points.push((terminal.0, terminal.1, terminal_weight));
    let q = fit_quadratic(&points)?;
    Ok((q, (0..steps).map(|t| q.eval(offset + t as f64)).collect()))
}

/// `L / (1 + exp(-k (s - t0)))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Logistic {
    pub l: f64,
    pub k: f64,
    pub t0: f64,
}

impl Logistic {
    pub fn eval(&self, s: f64) -> f64 {
        self.l / (1.0 + (-self.k * (s - self.t0)).exp())
    }

    fn sse(&self, points: &[(f64, f64)]) -> f64 {
        points.iter().map(|&(s, y)| (y - self.eval(s)).powi(2)).sum()
    }
}

const LM_ITERATIONS: usize = 500;

fn levenberg_marquardt(points: &[(f64, f64)], start: Logistic) -> Option<Logistic> {
    let mut p = start;
    let mut cost = p.sse(points);
    let mut mu = 1e-3;
    for _ in 0..LM_ITERATIONS {
        let mut jtj = Matrix3::zeros();
        let mut jtr = Vector3::zeros();
        for &(s, y) in points {
            let sig = 1.0 / (1.0 + (-p.k * (s - p.t0)).exp());
            let d = p.l * sig * (1.0 - sig);
            let j = Vector3::new(sig, d * (s - p.t0), -d * p.k);
            jtj += j * j.transpose();
            jtr += j * (y - p.l * sig);
        }
        let mut improved = false;
        while mu < 1e12 {
            let mut a = jtj;
            for i in 0..3 {
                a[(i, i)] += mu * jtj[(i, i)].max(1e-12);
            }
            let Some(step) = a.lu().solve(&jtr) else {
                mu *= 10.0;
                continue;
            };
            let next = Logistic { l: p.l + step[0], k: p.k + step[1], t0: p.t0 + step[2] };
            let next_cost = next.sse(points);
            if next_cost.is_finite() && next_cost <= cost {
                let rel = (cost - next_cost) / cost.max(f64::MIN_POSITIVE);
                p = next;
                cost = next_cost;
                mu = (mu / 10.0).max(1e-15);
                improved = true;
                if rel < 1e-15 || cost < 1e-30 {
                    return Some(p);
                }
                break;
            }
            mu *= 10.0;
        }
        if !improved {
            break;
        }
    }
    (p.l.is_finite() && p.k.is_finite() && p.t0.is_finite()).then_some(p)
}

/// Least-squares logistic fit from 16 starts; values are rescaled by their
/// maximum before fitting. Flat inputs give a constant curve.
pub fn fit_logistic(points: &[(f64, f64)]) -> Result<Logistic> {
    let fail = |msg: &str| Error::NonConvergence { family: "logistic".into(), diagnostics: msg.into() };
    if points.len() < 3 {
        return Err(fail("fewer than three points"));
    }
    let scale = points.iter().map(|p| p.1.abs()).fold(0.0, f64::max);
    if !(scale > 0.0) || points.iter().any(|p| !p.0.is_finite() || !p.1.is_finite()) {
        return Err(fail("values must be finite and not all zero"));
    }
    let first_arg = points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let min = points.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    if scale - min <= 1e-12 * scale {
        // Any k fits a plateau; place the midpoint far before the data.
        return Ok(Logistic { l: min, k: 1.0, t0: first_arg - 1000.0 });
    }
    let scaled: Vec<(f64, f64)> = points.iter().map(|&(s, y)| (s, y / scale)).collect();
    let sorted = {
        let mut s = scaled.clone();
        s.sort_by(|a, b| a.0.total_cmp(&b.0));
        s
    };
    let direction = if sorted.last().unwrap().1 >= sorted[0].1 { 1.0 } else { -1.0 };
    let mut best: Option<(f64, Logistic)> = None;
    for l in [1.0, 2.0] {
        for k in [0.1, 0.3, 0.6, 1.0] {
            for t0 in [15.0, 25.0] {
                let start = Logistic { l, k: direction * k, t0 };
                if let Some(fit) = levenberg_marquardt(&scaled, start) {
                    let cost = fit.sse(&scaled);
                    if cost.is_finite() && best.is_none_or(|(c, _)| cost < c) {
                        best = Some((cost, fit));
                    }
                }
            }
        }
    }
    let (_, fit) = best.ok_or_else(|| fail("no start converged"))?;
    Ok(Logistic { l: fit.l * scale, ..fit })
}

/// Logistic trend evaluated at `offset + t` for `t = 0..steps`.
pub fn trend_logistic(points: &[(f64, f64)], offset: f64, steps: usize) -> Result<(Logistic, Vec<f64>)> {
    let fit = fit_logistic(points)?;
    Ok((fit, (0..steps).map(|t| fit.eval(offset + t as f64)).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_stops_short_of_the_terminal() {
        assert_eq!(trend_linear(0.0, 14.0, 14), (0..14).map(f64::from).collect::<Vec<_>>());
        assert_eq!(trend_linear(5.0, 5.0, 14), vec![5.0; 14]);
        let p = trend_linear(100.0, 240.0, 14);
        assert_eq!(p[13], 100.0 + (13.0 / 14.0) * 140.0);
    }

    #[test]
    fn quadratic_reproduces_its_own_class() {
        let q = |s: f64| 0.5 * s * s - 3.0 * s + 40.0;
        let hist: Vec<(f64, f64)> = (1..=18).map(|s| (s as f64, q(s as f64))).collect();
        let (fit, path) = trend_quadratic(&hist, (31.0, q(31.0)), 18.0, 18.0, 14).unwrap();
        assert!((fit.a - 0.5).abs() < 1e-8 && (fit.b + 3.0).abs() < 1e-8 && (fit.c - 40.0).abs() < 1e-8);
        for (t, v) in path.iter().enumerate() {
            assert!((v - q(18.0 + t as f64)).abs() < 1e-8);
        }
    }

    #[test]
    fn heavy_terminal_weight_hits_the_terminal() {
        let hist: Vec<(f64, f64)> = (1..=18).map(|s| (s as f64, 100.0 + (s as f64 * 0.7).sin() * 10.0)).collect();
        let terminal = 500.0;
        let (fit, _) = trend_quadratic(&hist, (31.0, terminal), 1e8, 18.0, 14).unwrap();
        assert!((fit.eval(31.0) - terminal).abs() < 1e-4 * terminal);
    }

    #[test]
    fn quadratic_is_stationary_at_the_solution() {
        let mut pts: Vec<(f64, f64, f64)> = (1..=18).map(|s| (s as f64, 50.0 + s as f64 * 2.0 + (s as f64).cos(), 1.0)).collect();
        pts.push((31.0, 400.0, 18.0));
        let q = fit_quadratic(&pts).unwrap();
        let mut grad = [0.0; 3];
        for &(s, y, w) in &pts {
            let r = y - q.eval(s);
            grad[0] += -2.0 * w * r * s * s;
            grad[1] += -2.0 * w * r * s;
            grad[2] += -2.0 * w * r;
        }
        let scale: f64 = pts.iter().map(|p| p.2 * p.1 * p.0 * p.0).sum();
        assert!(grad.iter().all(|g| g.abs() < 1e-8 * scale), "{grad:?}");
    }

    #[test]
    fn logistic_recovers_known_parameters() {
        let truth = Logistic { l: 100.0, k: 0.5, t0: 20.0 };
        let pts: Vec<(f64, f64)> = [1.0, 18.0, 24.0, 31.0, 36.0].iter().map(|&s| (s, truth.eval(s))).collect();
        let fit = fit_logistic(&pts).unwrap();
        assert!((fit.l / 100.0 - 1.0).abs() < 1e-3, "{fit:?}");
        assert!((fit.k / 0.5 - 1.0).abs() < 1e-3, "{fit:?}");
        assert!((fit.t0 / 20.0 - 1.0).abs() < 1e-3, "{fit:?}");
    }

    #[test]
    fn flat_logistic_is_constant() {
        let pts: Vec<(f64, f64)> = [1.0, 18.0, 24.0, 31.0, 36.0].iter().map(|&s| (s, 42.0)).collect();
        let (_, path) = trend_logistic(&pts, 18.0, 14).unwrap();
        assert!(path.iter().all(|v| (v - 42.0).abs() < 1e-9));
    }

    #[test]
    fn increasing_points_give_a_monotone_path() {
        let pts = vec![(1.0, 10.0), (18.0, 30.0), (24.0, 70.0), (31.0, 90.0), (36.0, 95.0)];
        let (fit, path) = trend_logistic(&pts, 18.0, 14).unwrap();
        assert!(fit.k > 0.0);
        assert!(path.windows(2).all(|w| w[1] >= w[0]));
    }
}
