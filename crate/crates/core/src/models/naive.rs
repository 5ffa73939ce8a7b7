use super::{Bounds, RawForecast};

/// Each step repeats the value observed one season earlier.
pub(super) fn seasonal_naive(y: &[f64], horizon: usize, period: usize) -> RawForecast {
    let n = y.len();
    let mean = (0..horizon).map(|h| y[n - period + h % period]).collect();
    let mut residuals = vec![f64::NAN; n];
    let mut ss = 0.0;
    for t in period..n {
        residuals[t] = y[t] - y[t - period];
        ss += residuals[t].powi(2);
    }
    let sigma2 = ss / (n - period) as f64;
    let sd = (0..horizon).map(|h| (sigma2 * (h / period + 1) as f64).sqrt()).collect();
    RawForecast { mean, bounds: Bounds::StdDev(sd), residuals }
}

/// Random walk with drift: the drift is the average first difference.
pub(super) fn drift(y: &[f64], horizon: usize) -> RawForecast {
    let n = y.len();
    let slope = (y[n - 1] - y[0]) / (n - 1) as f64;
    let mean = (1..=horizon).map(|h| y[n - 1] + h as f64 * slope).collect();
    let mut residuals = vec![f64::NAN; n];
    let mut ss = 0.0;
    for t in 1..n {
        residuals[t] = y[t] - y[t - 1] - slope;
        ss += residuals[t].powi(2);
    }
    let sigma2 = ss / (n - 2).max(1) as f64;
    let sd = (1..=horizon)
        .map(|h| {
            let h = h as f64;
            (sigma2 * h * (1.0 + h / (n - 1) as f64)).sqrt()
        })
        .collect();
    RawForecast { mean, bounds: Bounds::StdDev(sd), residuals }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn drift_variance_grows() {
        let y = [1.0, 3.0, 2.0, 5.0, 4.0, 6.0];
        let raw = drift(&y, 4);
        let Bounds::StdDev(sd) = raw.bounds else { panic!() };
        assert!(sd.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn seasonal_naive_steps_widen_per_year() {
        let y: Vec<f64> = (0..36).map(|t| (t % 12) as f64 + if t % 5 == 0 { 1.0 } else { 0.0 }).collect();
        let raw = seasonal_naive(&y, 25, 12);
        let Bounds::StdDev(sd) = raw.bounds else { panic!() };
        assert_eq!(sd[0], sd[11]);
        assert!((sd[12] / sd[0] - 2f64.sqrt()).abs() < 1e-12);
        assert!((sd[24] / sd[0] - 3f64.sqrt()).abs() < 1e-12);
    }
}
