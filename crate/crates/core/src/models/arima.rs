//! Seasonal ARIMA(p,d,q)(P,D,Q)_m by conditional sum of squares, with
//! automatic order selection.
//!
//! Differencing orders are chosen first (seasonal strength for `D`, a KPSS
//! test for `d`); the ARMA orders are then searched exhaustively by AICc on a
//! common effective sample so that candidate likelihoods are comparable.
//! AR and MA polynomials are parameterised through partial autocorrelations
//! (`tanh` of free parameters), so every candidate is stationary and
//! invertible by construction.

use super::decompose::seasonal_strength;
use super::{Bounds, RawForecast, PERIOD};
use crate::error::{Error, Result};
use crate::optim::NelderMead;
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ArimaOrder {
    pub p: usize,
    pub d: usize,
    pub q: usize,
    pub sp: usize,
    pub sd: usize,
    pub sq: usize,
}

impl std::fmt::Display for ArimaOrder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "ARIMA({},{},{})({},{},{})[{}]", self.p, self.d, self.q, self.sp, self.sd, self.sq, PERIOD)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArimaConfig {
    pub max_p: usize,
    pub max_q: usize,
    pub max_sp: usize,
    pub max_sq: usize,
    /// Upper bound on `p + q + P + Q`.
    pub max_order: usize,
    pub max_d: usize,
    pub seasonal: bool,
}

impl Default for ArimaConfig {
    fn default() -> Self {
        Self { max_p: 3, max_q: 3, max_sp: 1, max_sq: 1, max_order: 5, max_d: 1, seasonal: true }
    }
}

impl ArimaConfig {
    pub fn non_seasonal() -> Self {
        Self { seasonal: false, max_sp: 0, max_sq: 0, ..Self::default() }
    }
}

#[derive(Debug, Clone)]
pub struct ArimaFit {
    pub order: ArimaOrder,
    pub ar: Vec<f64>,
    pub ma: Vec<f64>,
    pub sar: Vec<f64>,
    pub sma: Vec<f64>,
    /// Mean of the differenced series (a drift when exactly one difference is taken).
    pub constant: f64,
    pub sigma2: f64,
    pub aicc: f64,
    y: Vec<f64>,
    w: Vec<f64>,
    innovations: Vec<f64>,
}

pub fn difference(x: &[f64], lag: usize) -> Vec<f64> {
    (lag..x.len()).map(|t| x[t] - x[t - lag]).collect()
}

/// KPSS level-stationarity statistic with Bartlett long-run variance.
pub fn kpss_statistic(x: &[f64]) -> f64 {
    let n = x.len();
    let m = stats::mean(x);
    let e: Vec<f64> = x.iter().map(|v| v - m).collect();
    let mut s = 0.0;
    let mut eta = 0.0;
    for v in &e {
        s += v;
        eta += s * s;
    }
    let lags = (4.0 * (n as f64 / 100.0).powf(0.25)).trunc() as usize;
    let nf = n as f64;
    let gamma0 = e.iter().map(|v| v * v).sum::<f64>() / nf;
    let mut lrv = gamma0;
    for l in 1..=lags.min(n.saturating_sub(1)) {
        let w = 1.0 - l as f64 / (lags as f64 + 1.0);
        let cov: f64 = (l..n).map(|t| e[t] * e[t - l]).sum::<f64>() / nf;
        lrv += 2.0 * w * cov;
    }
    if lrv <= 1e-10 * gamma0 {
        return 0.0;
    }
    eta / (nf * nf * lrv)
}

/// 5% critical value of the KPSS level test.
const KPSS_CRITICAL: f64 = 0.463;
/// Seasonal strength above which one seasonal difference is taken.
const SEASONAL_STRENGTH_THRESHOLD: f64 = 0.64;

fn is_constant(x: &[f64]) -> bool {
    x.iter().all(|v| (v - x[0]).abs() <= 1e-12 * x[0].abs().max(1.0))
}

pub fn choose_d(x: &[f64], max_d: usize) -> usize {
    let mut x = x.to_vec();
    let mut d = 0;
    while d < max_d && x.len() > 8 && !is_constant(&x) && kpss_statistic(&x) > KPSS_CRITICAL {
        x = difference(&x, 1);
        d += 1;
    }
    d
}

pub fn choose_seasonal_d(y: &[f64]) -> usize {
    if y.len() < 3 * PERIOD || is_constant(y) {
        return 0;
    }
    match seasonal_strength(y) {
        Some(s) if s > SEASONAL_STRENGTH_THRESHOLD => 1,
        _ => 0,
    }
}

/// Maps free parameters to a stationary AR polynomial via partial
/// autocorrelations and the Durbin-Levinson recursion.
fn pacf_to_coefficients(u: &[f64]) -> Vec<f64> {
    let mut phi: Vec<f64> = Vec::with_capacity(u.len());
    for (k, &uk) in u.iter().enumerate() {
        let r = 0.98 * uk.tanh();
        let prev = phi.clone();
        for j in 0..k {
            phi[j] = prev[j] - r * prev[k - 1 - j];
        }
        phi.push(r);
    }
    phi
}

/// `(1 - sum a_i B^i)(1 - sum A_k B^{mk})` as the coefficient list of
/// `1 - sum c_i B^i`, returning `c`.
fn expand_ar(ar: &[f64], sar: &[f64]) -> Vec<f64> {
    let len = ar.len() + PERIOD * sar.len();
    let mut poly = vec![0.0; len + 1];
    poly[0] = 1.0;
    for (i, a) in ar.iter().enumerate() {
        poly[i + 1] = -a;
    }
    let mut out = poly.clone();
    for (k, s) in sar.iter().enumerate() {
        let shift = PERIOD * (k + 1);
        for i in 0..=ar.len() {
            out[i + shift] += -s * poly[i];
        }
    }
    out[1..].iter().map(|c| -c).collect()
}

/// `(1 + sum b_i B^i)(1 + sum B_k B^{mk})` as `[b_1, b_2, ...]`.
fn expand_ma(ma: &[f64], sma: &[f64]) -> Vec<f64> {
    let len = ma.len() + PERIOD * sma.len();
    let mut poly = vec![0.0; len + 1];
    poly[0] = 1.0;
    for (i, b) in ma.iter().enumerate() {
        poly[i + 1] = *b;
    }
    let mut out = poly.clone();
    for (k, s) in sma.iter().enumerate() {
        let shift = PERIOD * (k + 1);
        for i in 0..=ma.len() {
            out[i + shift] += s * poly[i];
        }
    }
    out[1..].to_vec()
}

/// Conditional residuals of the centred differenced series; innovations
/// before the AR start are zero.
fn css_residuals(w: &[f64], constant: f64, a: &[f64], b: &[f64]) -> Vec<f64> {
    let start = a.len();
    let mut e = vec![0.0; w.len()];
    for t in start..w.len() {
        let mut v = w[t] - constant;
        for (i, ai) in a.iter().enumerate() {
            v -= ai * (w[t - i - 1] - constant);
        }
        for (j, bj) in b.iter().enumerate() {
            if t > j {
                v -= bj * e[t - j - 1];
            }
        }
        e[t] = v;
    }
    e
}

struct Candidate {
    order: ArimaOrder,
    with_constant: bool,
}

impl Candidate {
    fn n_coef(&self) -> usize {
        self.order.p + self.order.q + self.order.sp + self.order.sq + usize::from(self.with_constant)
    }
}

struct Unpacked {
    ar: Vec<f64>,
    ma: Vec<f64>,
    sar: Vec<f64>,
    sma: Vec<f64>,
    constant: f64,
}

fn unpack(c: &Candidate, u: &[f64], w_mean: f64, w_sd: f64) -> Unpacked {
    let o = c.order;
    let mut i = 0;
    let mut take = |k: usize| {
        let s = &u[i..i + k];
        i += k;
        s.to_vec()
    };
    let ar = pacf_to_coefficients(&take(o.p));
    let ma: Vec<f64> = pacf_to_coefficients(&take(o.q)).into_iter().map(|v| -v).collect();
    let sar = pacf_to_coefficients(&take(o.sp));
    let sma: Vec<f64> = pacf_to_coefficients(&take(o.sq)).into_iter().map(|v| -v).collect();
    let constant = if c.with_constant { w_mean + w_sd * take(1)[0] } else { 0.0 };
    Unpacked { ar, ma, sar, sma, constant }
}

fn fit_candidate(y: &[f64], w: &[f64], c: &Candidate, common_start: usize) -> Option<ArimaFit> {
    let w_mean = stats::mean(w);
    let w_sd = stats::std_dev(w, 0).max(1e-12);
    let k = c.n_coef();
    let objective = |u: &[f64]| -> f64 {
        let p = unpack(c, u, w_mean, w_sd);
        let a = expand_ar(&p.ar, &p.sar);
        let b = expand_ma(&p.ma, &p.sma);
        let e = css_residuals(w, p.constant, &a, &b);
        e[common_start..].iter().map(|v| v * v).sum::<f64>()
    };
    let x0 = vec![0.0; k];
    let best = NelderMead::default().with_max_evals(120 * (k + 1)).with_step(0.3).minimize(objective, &x0);
    if !best.value.is_finite() {
        return None;
    }
    let p = unpack(c, &best.x, w_mean, w_sd);
    let a = expand_ar(&p.ar, &p.sar);
    let b = expand_ma(&p.ma, &p.sma);
    let e = css_residuals(w, p.constant, &a, &b);

    let n_eff = (w.len() - common_start) as f64;
    let sse = best.value.max(1e-300 * n_eff);
    let sigma2_ml = sse / n_eff;
    let loglik = -0.5 * n_eff * ((2.0 * std::f64::consts::PI * sigma2_ml).ln() + 1.0);
    let npar = (k + 1) as f64;
    let aicc = if n_eff - npar - 1.0 > 0.0 {
        -2.0 * loglik + 2.0 * npar + 2.0 * npar * (npar + 1.0) / (n_eff - npar - 1.0)
    } else {
        f64::INFINITY
    };
    let own_start = a.len();
    let own_n = (w.len() - own_start) as f64;
    let sigma2 = e[own_start..].iter().map(|v| v * v).sum::<f64>() / (own_n - k as f64).max(1.0);
    Some(ArimaFit {
        order: c.order,
        ar: p.ar,
        ma: p.ma,
        sar: p.sar,
        sma: p.sma,
        constant: p.constant,
        sigma2,
        aicc,
        y: y.to_vec(),
        w: w.to_vec(),
        innovations: e,
    })
}

fn differenced(y: &[f64], d: usize, sd: usize) -> Vec<f64> {
    let mut w = y.to_vec();
    for _ in 0..sd {
        w = difference(&w, PERIOD);
    }
    for _ in 0..d {
        w = difference(&w, 1);
    }
    w
}

/// Fits a single, fixed order.
pub fn fit_arima(y: &[f64], order: ArimaOrder, with_constant: bool) -> Result<ArimaFit> {
    let w = differenced(y, order.d, order.sd);
    let c = Candidate { order, with_constant };
    let start = order.p + PERIOD * order.sp;
    if w.len() <= start + c.n_coef() + 2 {
        return Err(Error::SeriesTooShort { family: "arima".into(), required: start + c.n_coef() + 3, actual: w.len() });
    }
    fit_candidate(y, &w, &c, start)
        .ok_or_else(|| Error::NonConvergence { family: "arima".into(), diagnostics: order.to_string() })
}

/// Automatic order selection: differencing by tests, ARMA orders by AICc.
pub fn auto_arima(y: &[f64], cfg: &ArimaConfig) -> Result<ArimaFit> {
    if y.len() < 8 {
        return Err(Error::SeriesTooShort { family: "arima".into(), required: 8, actual: y.len() });
    }
    let sd = if cfg.seasonal { choose_seasonal_d(y) } else { 0 };
    let d = choose_d(&differenced(y, 0, sd), cfg.max_d);
    let w = differenced(y, d, sd);
    let n_w = w.len();
    let with_constant = d + sd <= 1;

    // Seasonal AR terms shift the conditional start by a whole season; only
    // allow them when enough differenced data remain.
    let max_sp = if cfg.seasonal && n_w >= 4 * PERIOD { cfg.max_sp } else { 0 };
    let max_sq = if cfg.seasonal && n_w >= 2 * PERIOD { cfg.max_sq } else { 0 };
    let common_start = cfg.max_p + PERIOD * max_sp;

    if is_constant(&w) {
        let c = Candidate { order: ArimaOrder { p: 0, d, q: 0, sp: 0, sd, sq: 0 }, with_constant };
        return fit_candidate(y, &w, &c, 0)
            .ok_or_else(|| Error::NonConvergence { family: "arima".into(), diagnostics: "constant".into() });
    }

    let mut best: Option<ArimaFit> = None;
    let mut diagnostics = Vec::new();
    for p in 0..=cfg.max_p {
        for q in 0..=cfg.max_q {
            for sp in 0..=max_sp {
                for sq in 0..=max_sq {
                    if p + q + sp + sq > cfg.max_order {
                        continue;
                    }
                    let c = Candidate { order: ArimaOrder { p, d, q, sp, sd, sq }, with_constant };
                    if n_w <= common_start + c.n_coef() + 2 {
                        continue;
                    }
                    match fit_candidate(y, &w, &c, common_start) {
                        Some(fit) if fit.aicc.is_finite() => {
                            if best.as_ref().is_none_or(|b| fit.aicc < b.aicc) {
                                best = Some(fit);
                            }
                        }
                        _ => diagnostics.push(c.order.to_string()),
                    }
                }
            }
        }
    }
    best.ok_or_else(|| Error::NonConvergence {
        family: "arima".into(),
        diagnostics: format!("no admissible candidate (n_w={n_w}); failed: {}", diagnostics.join(", ")),
    })
}

impl ArimaFit {
    /// Differencing operator `(1-B)^d (1-B^m)^D` as `[delta_1, ...]` in
    /// `y_t = w_t + sum delta_i y_{t-i}`.
    fn delta(&self) -> Vec<f64> {
        let mut poly = vec![1.0];
        let mul = |poly: &Vec<f64>, lag: usize| {
            let mut out = vec![0.0; poly.len() + lag];
            for (i, c) in poly.iter().enumerate() {
                out[i] += c;
                out[i + lag] -= c;
            }
            out
        };
        for _ in 0..self.order.sd {
            poly = mul(&poly, PERIOD);
        }
        for _ in 0..self.order.d {
            poly = mul(&poly, 1);
        }
        poly[1..].iter().map(|c| -c).collect()
    }

    pub fn point(&self, horizon: usize) -> Vec<f64> {
        let a = expand_ar(&self.ar, &self.sar);
        let b = expand_ma(&self.ma, &self.sma);
        let mut w = self.w.clone();
        let mut e = self.innovations.clone();
        for _ in 0..horizon {
            let t = w.len();
            let mut v = self.constant;
            for (i, ai) in a.iter().enumerate() {
                if t > i {
                    v += ai * (w[t - i - 1] - self.constant);
                }
            }
            for (j, bj) in b.iter().enumerate() {
                if t > j {
                    v += bj * e[t - j - 1];
                }
            }
            w.push(v);
            e.push(0.0);
        }
        let delta = self.delta();
        let mut y = self.y.clone();
        let n_w = self.w.len();
        for h in 0..horizon {
            let t = y.len();
            let mut v = w[n_w + h];
            for (i, di) in delta.iter().enumerate() {
                v += di * y[t - i - 1];
            }
            y.push(v);
        }
        y[self.y.len()..].to_vec()
    }

    /// Psi weights of the integrated model, `psi_0 = 1`.
    pub fn psi(&self, horizon: usize) -> Vec<f64> {
        let a = expand_ar(&self.ar, &self.sar);
        let b = expand_ma(&self.ma, &self.sma);
        let delta = self.delta();
        // (1 - sum a_i B^i)(1 - sum delta_i B^i) = 1 - sum g_i B^i
        let mut lhs = vec![0.0; a.len() + delta.len() + 1];
        let pa: Vec<f64> = std::iter::once(1.0).chain(a.iter().map(|v| -v)).collect();
        let pd: Vec<f64> = std::iter::once(1.0).chain(delta.iter().map(|v| -v)).collect();
        for (i, x) in pa.iter().enumerate() {
            for (j, z) in pd.iter().enumerate() {
                lhs[i + j] += x * z;
            }
        }
        let g: Vec<f64> = lhs[1..].iter().map(|v| -v).collect();
        let mut psi = vec![1.0];
        for j in 1..horizon {
            let mut v = if j <= b.len() { b[j - 1] } else { 0.0 };
            for (i, gi) in g.iter().enumerate() {
                if i < j {
                    v += gi * psi[j - i - 1];
                }
            }
            psi.push(v);
        }
        psi
    }

    pub fn forecast_sd(&self, horizon: usize) -> Vec<f64> {
        let psi = self.psi(horizon);
        let mut acc = 0.0;
        psi.iter()
            .map(|p| {
                acc += p * p;
                (self.sigma2 * acc).sqrt()
            })
            .collect()
    }

    /// In-sample one-step residuals aligned to `y` (NaN before the first
    /// conditional residual).
    pub fn residuals(&self) -> Vec<f64> {
        let lead = self.y.len() - self.w.len();
        let start = self.ar.len() + PERIOD * self.sar.len();
        let mut out = vec![f64::NAN; self.y.len()];
        out[start + lead..self.w.len() + lead].copy_from_slice(&self.innovations[start..]);
        out
    }

    pub(super) fn raw_forecast(&self, horizon: usize) -> RawForecast {
        RawForecast { mean: self.point(horizon), bounds: Bounds::StdDev(self.forecast_sd(horizon)), residuals: self.residuals() }
    }
}
