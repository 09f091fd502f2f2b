//! ARIMA(p,d,q) estimation by conditional sum of squares, information
//! criteria, grid-search order selection and forecasting.
//!
//! Sign convention for the differenced series `y`:
//!
//! ```text
//! y(t) = c + φ1 y(t-1) + … + φp y(t-p) - θ1 ε(t-1) - … - θq ε(t-q) + ε(t)
//! ```
//!
//! The moving-average terms enter with a minus sign; [`crate::synth::gen_arma`]
//! simulates with the same convention.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{least_squares, minimize_simplex_restarted, SimplexOptions};
use crate::series::{difference, mean, sample_variance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ArimaOrder {
    pub p: usize,
    pub d: usize,
    pub q: usize,
}

impl ArimaOrder {
    pub const fn new(p: usize, d: usize, q: usize) -> Self {
        Self { p, d, q }
    }

    /// Number of estimated parameters counted by AIC/BIC: intercept, the
    /// ARMA coefficients and the innovation variance.
    pub fn param_count(&self) -> usize {
        self.p + self.q + 2
    }
}

impl std::fmt::Display for ArimaOrder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{},{})", self.p, self.d, self.q)
    }
}

/// Coefficients of an ARIMA model, independent of any fitted data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArimaModel {
    pub order: ArimaOrder,
    pub c: f64,
    pub phi: Vec<f64>,
    pub theta: Vec<f64>,
}

impl ArimaModel {
    pub fn new(order: ArimaOrder, c: f64, phi: Vec<f64>, theta: Vec<f64>) -> Result<Self> {
        if phi.len() != order.p {
            return Err(Error::DimensionMismatch {
                expected: order.p,
                got: phi.len(),
            });
        }
        if theta.len() != order.q {
            return Err(Error::DimensionMismatch {
                expected: order.q,
                got: theta.len(),
            });
        }
        Ok(Self {
            order,
            c,
            phi,
            theta,
        })
    }

    #[cfg(test)]
    fn pack(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(1 + self.order.p + self.order.q);
        v.push(self.c);
        v.extend_from_slice(&self.phi);
        v.extend_from_slice(&self.theta);
        v
    }

    fn unpack(order: ArimaOrder, packed: &[f64]) -> Self {
        Self {
            order,
            c: packed[0],
            phi: packed[1..1 + order.p].to_vec(),
            theta: packed[1 + order.p..1 + order.p + order.q].to_vec(),
        }
    }

    /// True when every root of the AR polynomial lies outside the unit circle.
    pub fn is_stationary(&self) -> bool {
        roots_outside_unit_circle(&self.phi)
    }

    /// One-step predictions and residuals over an already differenced series.
    /// Both vectors have the length of `y`; entries before index `p` are zero
    /// (pre-sample residuals are fixed at zero and no prediction is made).
    fn filter(&self, y: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let p = self.order.p;
        let mut preds = vec![0.0; y.len()];
        let mut resid = vec![0.0; y.len()];
        for t in p..y.len() {
            let mut pred = self.c;
            for (i, phi) in self.phi.iter().enumerate() {
                pred += phi * y[t - 1 - i];
            }
            for (j, theta) in self.theta.iter().enumerate() {
                if t > j {
                    pred -= theta * resid[t - 1 - j];
                }
            }
            let e = y[t] - pred;
            if !e.is_finite() {
                return Err(Error::NonFinite(format!("residual at t={t}")));
            }
            preds[t] = pred;
            resid[t] = e;
        }
        Ok((preds, resid))
    }

    /// Walk-forward one-step forecasts of the last `test_len` points of
    /// `history` (levels), holding the coefficients fixed and updating the
    /// residuals from realized values.
    pub fn forecast_one_step(&self, history: &[f64], test_len: usize) -> Result<Vec<f64>> {
        let n = history.len();
        if test_len >= n {
            return Err(Error::invalid(format!(
                "test length {test_len} must be shorter than history ({n})"
            )));
        }
        let d = self.order.d;
        let first = n - test_len;
        if first < d + self.order.p {
            return Err(Error::InsufficientData {
                needed: d + self.order.p + test_len,
                got: n,
            });
        }
        let y = difference(history, d)?;
        let (preds, _) = self.filter(&y)?;
        let coeffs = binomial_row(d);
        Ok((first..n)
            .map(|s| {
                let mut level = preds[s - d];
                for k in 1..=d {
                    let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
                    level += sign * coeffs[k] * history[s - k];
                }
                level
            })
            .collect())
    }

    /// Iterated forecasts `horizon` steps past the end of `history` (levels).
    /// Unknown future innovations are zero; differenced forecasts are
    /// integrated back to levels.
    pub fn forecast_multi_step(&self, history: &[f64], horizon: usize) -> Result<Vec<f64>> {
        if horizon < 1 {
            return Err(Error::invalid("forecast horizon must be at least 1"));
        }
        let d = self.order.d;
        let y = difference(history, d)?;
        if y.len() < self.order.p {
            return Err(Error::InsufficientData {
                needed: d + self.order.p,
                got: history.len(),
            });
        }
        let (_, resid) = self.filter(&y)?;
        let mut ys = y;
        let mut es = resid;
        let start = ys.len();
        for _ in 0..horizon {
            let t = ys.len();
            let mut pred = self.c;
            for (i, phi) in self.phi.iter().enumerate() {
                pred += phi * ys[t - 1 - i];
            }
            for (j, theta) in self.theta.iter().enumerate() {
                if t > j {
                    pred -= theta * es[t - 1 - j];
                }
            }
            ys.push(pred);
            es.push(0.0);
        }
        let mut out = ys[start..].to_vec();
        for k in (0..d).rev() {
            let level = difference(history, k)?;
            let mut acc = *level.last().expect("non-empty level");
            for v in out.iter_mut() {
                acc += *v;
                *v = acc;
            }
        }
        Ok(out)
    }
}

fn binomial_row(d: usize) -> Vec<f64> {
    let mut row = vec![1.0];
    for _ in 0..d {
        let mut next = vec![1.0; row.len() + 1];
        for i in 1..row.len() {
            next[i] = row[i - 1] + row[i];
        }
        row = next;
    }
    row
}

/// Stationarity of `1 - a1 z - … - ap z^p` via the step-down (reverse
/// Levinson–Durbin) recursion: every partial autocorrelation must lie
/// strictly inside (-1, 1).
pub fn roots_outside_unit_circle(coeffs: &[f64]) -> bool {
    let mut a = coeffs.to_vec();
    while let Some(&r) = a.last() {
        if !(r.abs() < 1.0) {
            return false;
        }
        let k = a.len();
        let denom = 1.0 - r * r;
        let prev: Vec<f64> = (0..k - 1)
            .map(|j| (a[j] + r * a[k - 2 - j]) / denom)
            .collect();
        a = prev;
    }
    true
}

/// Conditional sum of squares for packed parameters `[c, φ1..φp, θ1..θq]`
/// over an already differenced series. The recursion starts at `t = p` with
/// zero pre-sample residuals.
pub fn arima_css_objective(params: &[f64], p: usize, q: usize, series: &[f64]) -> Result<f64> {
    if params.len() != 1 + p + q {
        return Err(Error::DimensionMismatch {
            expected: 1 + p + q,
            got: params.len(),
        });
    }
    if series.len() <= p + q {
        return Err(Error::InsufficientData {
            needed: p + q + 1,
            got: series.len(),
        });
    }
    css_from(params, p, q, series, p)
}

fn css_from(params: &[f64], p: usize, q: usize, series: &[f64], from: usize) -> Result<f64> {
    let model = ArimaModel::unpack(ArimaOrder::new(p, 0, q), params);
    let (_, resid) = model.filter(series)?;
    let css: f64 = resid[from..].iter().map(|e| e * e).sum();
    if !css.is_finite() {
        return Err(Error::NonFinite("conditional sum of squares".into()));
    }
    Ok(css)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArimaOptions {
    pub enforce_stationarity: bool,
    pub max_iter: usize,
    pub restarts: usize,
    /// Leading observations of the undifferenced series left out of the
    /// sum of squares. The effective value is at least `p + d`; order
    /// selection raises it so every candidate scores the same sample.
    pub condition_on: usize,
}

impl Default for ArimaOptions {
    fn default() -> Self {
        Self {
            enforce_stationarity: false,
            max_iter: 4_000,
            restarts: 3,
            condition_on: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArimaFit {
    pub model: ArimaModel,
    pub sigma2: f64,
    /// Residuals of the differenced series from the first scored index
    /// (`p`, or later under [`ArimaOptions::condition_on`]).
    pub residuals: Vec<f64>,
    pub n_eff: usize,
    pub loglik: f64,
    pub aic: f64,
    pub bic: f64,
    pub mse: f64,
    pub stationary: bool,
    pub converged: bool,
}

impl ArimaFit {
    pub fn order(&self) -> ArimaOrder {
        self.model.order
    }

    pub fn forecast_one_step(&self, history: &[f64], test_len: usize) -> Result<Vec<f64>> {
        self.model.forecast_one_step(history, test_len)
    }

    pub fn forecast_multi_step(&self, history: &[f64], horizon: usize) -> Result<Vec<f64>> {
        self.model.forecast_multi_step(history, horizon)
    }
}

/// Gaussian log-likelihood implied by a CSS variance estimate.
pub fn css_loglik(sigma2: f64, n_eff: usize) -> f64 {
    -0.5 * n_eff as f64 * ((2.0 * std::f64::consts::PI * sigma2).ln() + 1.0)
}

pub fn aic(loglik: f64, k: usize) -> f64 {
    2.0 * k as f64 - 2.0 * loglik
}

pub fn bic(loglik: f64, k: usize, n: usize) -> f64 {
    k as f64 * (n as f64).ln() - 2.0 * loglik
}

fn hannan_rissanen_start(y: &[f64], p: usize, q: usize) -> Option<Vec<f64>> {
    let n = y.len();
    if p + q == 0 {
        return Some(vec![mean(y)]);
    }
    let lagged = |t: usize, resid: Option<&[f64]>| {
        let mut row = Vec::with_capacity(1 + p + q);
        row.push(1.0);
        row.extend((1..=p).map(|i| y[t - i]));
        if let Some(e) = resid {
            row.extend((1..=q).map(|j| e[t - j]));
        }
        row
    };
    if q == 0 {
        let rows: Vec<Vec<f64>> = (p..n).map(|t| lagged(t, None)).collect();
        return least_squares(&rows, &y[p..]).ok();
    }
    // Long autoregression supplies residual proxies for the MA lags.
    let m = (p + q + 5).max(10).min(n / 5);
    if m == 0 || n <= m + q + 1 + p + q {
        return None;
    }
    let rows: Vec<Vec<f64>> = (m..n)
        .map(|t| {
            let mut r = vec![1.0];
            r.extend((1..=m).map(|i| y[t - i]));
            r
        })
        .collect();
    let long = least_squares(&rows, &y[m..]).ok()?;
    let mut ehat = vec![0.0; n];
    for t in m..n {
        let fitted: f64 = long[0] + (1..=m).map(|i| long[i] * y[t - i]).sum::<f64>();
        ehat[t] = y[t] - fitted;
    }
    let start = m + q.max(p);
    let rows: Vec<Vec<f64>> = (start..n).map(|t| lagged(t, Some(&ehat))).collect();
    let mut coef = least_squares(&rows, &y[start..]).ok()?;
    // ε enters with a minus sign, so the regression coefficient is -θ.
    for v in &mut coef[1 + p..] {
        *v = -*v;
    }
    Some(coef)
}

pub fn fit_arima(series: &[f64], order: ArimaOrder, options: &ArimaOptions) -> Result<ArimaFit> {
    let ArimaOrder { p, d, q } = order;
    let needed = d + p + q + 2;
    if series.len() < needed {
        return Err(Error::InsufficientData {
            needed,
            got: series.len(),
        });
    }
    let y = difference(series, d)?;
    let from = p.max(options.condition_on.saturating_sub(d));
    if y.len() < from + q + 2 {
        return Err(Error::InsufficientData {
            needed: d + from + q + 2,
            got: series.len(),
        });
    }
    if sample_variance(&y) <= 0.0 {
        return Err(Error::DegenerateVariance(
            "differenced series is constant".into(),
        ));
    }

    // The search stays inside the invertible MA region: outside it the
    // residual recursion grows without bound once it leaves the sample.
    let css = |params: &[f64]| {
        if !roots_outside_unit_circle(&params[1 + p..]) {
            return f64::INFINITY;
        }
        css_from(params, p, q, &y, from).unwrap_or(f64::INFINITY)
    };
    let fallback = {
        let mut v = vec![0.0; 1 + p + q];
        v[0] = mean(&y);
        v
    };
    let start = hannan_rissanen_start(&y, p, q)
        .map(|mut s| {
            if !roots_outside_unit_circle(&s[1 + p..]) {
                s[1 + p..].iter_mut().for_each(|v| *v = 0.0);
            }
            s
        })
        .filter(|s| css(s).is_finite())
        .unwrap_or(fallback);
    let css0 = css(&start);
    if !css0.is_finite() {
        return Err(Error::Optimizer("objective not finite at start".into()));
    }
    let simplex = SimplexOptions {
        max_iter: options.max_iter,
        f_tol: 1e-12 * css0.max(f64::MIN_POSITIVE),
        x_tol: 1e-8,
    };
    let opt = minimize_simplex_restarted(css, &start, &simplex, options.restarts)?;
    let model = ArimaModel::unpack(order, &opt.x_star);
    let (_, resid) = model.filter(&y)?;
    let residuals = resid[from..].to_vec();
    let n_eff = residuals.len();
    let sse: f64 = residuals.iter().map(|e| e * e).sum();
    let sigma2 = sse / n_eff as f64;
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::DegenerateVariance(format!(
            "innovation variance {sigma2}"
        )));
    }
    let stationary = model.is_stationary();
    if options.enforce_stationarity && !stationary {
        return Err(Error::NonStationary(format!(
            "AR polynomial of {order} has a root on or inside the unit circle"
        )));
    }
    let loglik = css_loglik(sigma2, n_eff);
    let k = order.param_count();
    Ok(ArimaFit {
        model,
        sigma2,
        residuals,
        n_eff,
        loglik,
        aic: aic(loglik, k),
        bic: bic(loglik, k, n_eff),
        mse: sigma2,
        stationary,
        converged: opt.converged,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    #[default]
    Aic,
    Bic,
    Mse,
}

impl Criterion {
    pub fn score(&self, fit: &ArimaFit) -> f64 {
        match self {
            Criterion::Aic => fit.aic,
            Criterion::Bic => fit.bic,
            Criterion::Mse => fit.mse,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderGrid {
    pub p_max: usize,
    pub d_max: usize,
    pub q_max: usize,
}

impl Default for OrderGrid {
    fn default() -> Self {
        Self {
            p_max: 5,
            d_max: 1,
            q_max: 5,
        }
    }
}

impl OrderGrid {
    pub fn orders(&self) -> Vec<ArimaOrder> {
        let mut out = Vec::new();
        for d in 0..=self.d_max {
            for p in 0..=self.p_max {
                for q in 0..=self.q_max {
                    out.push(ArimaOrder::new(p, d, q));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct GridCell {
    pub order: ArimaOrder,
    pub fit: std::result::Result<ArimaFit, String>,
}

#[derive(Debug, Clone)]
pub struct OrderSelection {
    pub best: ArimaOrder,
    pub criterion: Criterion,
    pub cells: Vec<GridCell>,
}

impl OrderSelection {
    pub fn best_fit(&self) -> &ArimaFit {
        self.cells
            .iter()
            .find(|c| c.order == self.best)
            .and_then(|c| c.fit.as_ref().ok())
            .expect("best order always has a successful fit")
    }

    pub fn best_score(&self) -> f64 {
        self.criterion.score(self.best_fit())
    }
}

/// Fits every order in the grid and keeps the criterion minimizer. Ties go to
/// the smaller `p + q`, then the smaller `p`, then the smaller `d`.
pub fn select_order(
    series: &[f64],
    grid: &OrderGrid,
    criterion: Criterion,
    options: &ArimaOptions,
) -> Result<OrderSelection> {
    if grid.d_max > 1 {
        return Err(Error::invalid("d_max must be 0 or 1"));
    }
    // Likelihoods are only comparable over the same observations.
    let options = ArimaOptions {
        condition_on: options.condition_on.max(grid.p_max + grid.d_max),
        ..*options
    };
    let cells: Vec<GridCell> = grid
        .orders()
        .into_par_iter()
        .map(|order| GridCell {
            order,
            fit: fit_arima(series, order, &options).map_err(|e| e.to_string()),
        })
        .collect();
    let best = cells
        .iter()
        .filter_map(|c| c.fit.as_ref().ok().map(|f| (c.order, criterion.score(f))))
        .filter(|(_, s)| s.is_finite())
        .min_by(|(oa, sa), (ob, sb)| {
            sa.total_cmp(sb)
                .then((oa.p + oa.q).cmp(&(ob.p + ob.q)))
                .then(oa.p.cmp(&ob.p))
                .then(oa.d.cmp(&ob.d))
        })
        .map(|(o, _)| o)
        .ok_or_else(|| Error::Optimizer("every grid cell failed to fit".into()))?;
    Ok(OrderSelection {
        best,
        criterion,
        cells,
    })
}
