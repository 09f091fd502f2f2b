//! GARCH(1,1) with Gaussian innovations:
//!
//! ```text
//! r(t)  = μ + ε(t),   ε(t) = σ(t) z(t),   z(t) ~ N(0, 1)
//! σ²(t) = α0 + α1 ε²(t-1) + β1 σ²(t-1)
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{minimize_simplex_restarted, SimplexOptions};
use crate::series::{mean, sample_variance};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GarchParams {
    pub mu: f64,
    pub alpha0: f64,
    pub alpha1: f64,
    pub beta1: f64,
}

impl GarchParams {
    pub fn new(mu: f64, alpha0: f64, alpha1: f64, beta1: f64) -> Self {
        Self {
            mu,
            alpha0,
            alpha1,
            beta1,
        }
    }

    pub fn persistence(&self) -> f64 {
        self.alpha1 + self.beta1
    }

    /// Long-run variance `α0 / (1 - α1 - β1)`; `None` without covariance stationarity.
    pub fn unconditional_variance(&self) -> Option<f64> {
        (self.persistence() < 1.0).then(|| self.alpha0 / (1.0 - self.persistence()))
    }

    pub fn validate(&self, require_stationary: bool) -> Result<()> {
        let finite = [self.mu, self.alpha0, self.alpha1, self.beta1]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::NonFinite("GARCH parameter".into()));
        }
        if !(self.alpha0 > 0.0) {
            return Err(Error::invalid(format!("alpha0 = {} must be > 0", self.alpha0)));
        }
        if self.alpha1 < 0.0 || self.beta1 < 0.0 {
            return Err(Error::invalid("alpha1 and beta1 must be non-negative"));
        }
        if require_stationary && self.persistence() >= 1.0 {
            return Err(Error::NonStationary(format!(
                "alpha1 + beta1 = {} >= 1",
                self.persistence()
            )));
        }
        Ok(())
    }

    /// Unconstrained coordinates `[μ, ln α0, ln(α1/s), ln(β1/s)]` with
    /// `s = 1 - α1 - β1`; requires strictly positive α1, β1 and s.
    pub fn to_unconstrained(&self) -> Result<[f64; 4]> {
        self.validate(true)?;
        if self.alpha1 <= 0.0 || self.beta1 <= 0.0 {
            return Err(Error::invalid(
                "reparameterization needs strictly positive alpha1 and beta1",
            ));
        }
        let slack = 1.0 - self.alpha1 - self.beta1;
        Ok([
            self.mu,
            self.alpha0.ln(),
            (self.alpha1 / slack).ln(),
            (self.beta1 / slack).ln(),
        ])
    }

    /// Multinomial-logistic map back onto `α0 > 0`, `α1, β1 > 0`, `α1 + β1 < 1`.
    pub fn from_unconstrained(x: &[f64; 4]) -> Self {
        let (u, v) = (x[2], x[3]);
        // log-sum-exp with the implicit zero logit of the slack component
        let top = u.max(v).max(0.0);
        let (eu, ev, e0) = ((u - top).exp(), (v - top).exp(), (-top).exp());
        let total = eu + ev + e0;
        Self {
            mu: x[0],
            alpha0: x[1].exp(),
            alpha1: eu / total,
            beta1: ev / total,
        }
    }
}

/// Conditional variance path started at `sigma2_init`.
pub fn garch_filter(params: &GarchParams, returns: &[f64], sigma2_init: f64) -> Result<Vec<f64>> {
    params.validate(false)?;
    if !(sigma2_init > 0.0 && sigma2_init.is_finite()) {
        return Err(Error::invalid(format!("sigma2_init = {sigma2_init} must be > 0")));
    }
    let mut out = Vec::with_capacity(returns.len());
    let mut s2 = sigma2_init;
    for t in 0..returns.len() {
        if t > 0 {
            let e = returns[t - 1] - params.mu;
            s2 = params.alpha0 + params.alpha1 * e * e + params.beta1 * s2;
            if !s2.is_finite() {
                return Err(Error::NonFinite(format!("conditional variance at t={t}")));
            }
        }
        out.push(s2);
    }
    Ok(out)
}

/// Initial variance used by the likelihood: the sample variance of `r - μ`.
pub fn default_sigma2_init(returns: &[f64]) -> f64 {
    sample_variance(returns)
}

/// Gaussian log-likelihood given an explicit starting variance. Invalid
/// parameters yield `-inf` rather than an error so optimizers can step away.
pub fn garch_log_likelihood_with_init(params: &GarchParams, returns: &[f64], sigma2_init: f64) -> f64 {
    let Ok(path) = garch_filter(params, returns, sigma2_init) else {
        return f64::NEG_INFINITY;
    };
    let ln2pi = (2.0 * std::f64::consts::PI).ln();
    let ll: f64 = returns
        .iter()
        .zip(&path)
        .map(|(r, s2)| {
            let e = r - params.mu;
            -0.5 * (ln2pi + s2.ln()) - e * e / (2.0 * s2)
        })
        .sum();
    if ll.is_nan() {
        f64::NEG_INFINITY
    } else {
        ll
    }
}

pub fn garch_log_likelihood(params: &GarchParams, returns: &[f64]) -> f64 {
    if returns.len() < 2 {
        return f64::NEG_INFINITY;
    }
    garch_log_likelihood_with_init(params, returns, default_sigma2_init(returns))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GarchFit {
    pub params: GarchParams,
    pub sigma2_path: Vec<f64>,
    pub residuals: Vec<f64>,
    pub loglik: f64,
    pub start_params: GarchParams,
    pub start_loglik: f64,
    pub sigma2_init: f64,
    pub converged: bool,
}

pub fn garch_start(returns: &[f64]) -> GarchParams {
    GarchParams::new(mean(returns), 0.1 * sample_variance(returns), 0.1, 0.8)
}

/// Maximum-likelihood fit on the unconstrained reparameterization.
pub fn fit_garch(returns: &[f64]) -> Result<GarchFit> {
    if returns.len() < 3 {
        return Err(Error::InsufficientData {
            needed: 3,
            got: returns.len(),
        });
    }
    let var = sample_variance(returns);
    if !(var > 0.0) || returns.iter().all(|r| *r == returns[0]) {
        return Err(Error::DegenerateVariance("return series is constant".into()));
    }
    let sigma2_init = default_sigma2_init(returns);
    let start = garch_start(returns);
    let start_loglik = garch_log_likelihood_with_init(&start, returns, sigma2_init);
    let x0 = start.to_unconstrained()?;
    let objective = |x: &[f64]| {
        let p = GarchParams::from_unconstrained(&[x[0], x[1], x[2], x[3]]);
        -garch_log_likelihood_with_init(&p, returns, sigma2_init)
    };
    let options = SimplexOptions {
        max_iter: 4_000,
        f_tol: 1e-9,
        x_tol: 1e-7,
    };
    let opt = minimize_simplex_restarted(objective, &x0, &options, 3)?;
    let mut params = GarchParams::from_unconstrained(&[opt.x_star[0], opt.x_star[1], opt.x_star[2], opt.x_star[3]]);
    let mut loglik = garch_log_likelihood_with_init(&params, returns, sigma2_init);
    if !(loglik >= start_loglik) {
        params = start;
        loglik = start_loglik;
    }
    if !loglik.is_finite() {
        return Err(Error::Optimizer("likelihood not finite at optimum".into()));
    }
    let sigma2_path = garch_filter(&params, returns, sigma2_init)?;
    let residuals = returns.iter().map(|r| r - params.mu).collect();
    Ok(GarchFit {
        params,
        sigma2_path,
        residuals,
        loglik,
        start_params: start,
        start_loglik,
        sigma2_init,
        converged: opt.converged,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GarchForecast {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

pub fn forecast_garch(fit: &GarchFit, horizon: usize) -> Result<GarchForecast> {
    if horizon < 1 {
        return Err(Error::invalid("forecast horizon must be at least 1"));
    }
    let p = &fit.params;
    let (Some(&e), Some(&s2)) = (fit.residuals.last(), fit.sigma2_path.last()) else {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    };
    let mut variance = Vec::with_capacity(horizon);
    let mut next = p.alpha0 + p.alpha1 * e * e + p.beta1 * s2;
    variance.push(next);
    for _ in 1..horizon {
        next = p.alpha0 + p.persistence() * next;
        variance.push(next);
    }
    Ok(GarchForecast {
        mean: vec![p.mu; horizon],
        variance,
    })
}

/// One-step mean and variance forecasts for the last `test_len` points of
/// `history`, with parameters fixed and the filter run through realized data.
pub fn walk_forward(fit: &GarchFit, history: &[f64], test_len: usize) -> Result<GarchForecast> {
    if test_len >= history.len() {
        return Err(Error::invalid(format!(
            "test length {test_len} must be shorter than history ({})",
            history.len()
        )));
    }
    let path = garch_filter(&fit.params, history, fit.sigma2_init)?;
    let first = history.len() - test_len;
    Ok(GarchForecast {
        mean: vec![fit.params.mu; test_len],
        variance: path[first..].to_vec(),
    })
}

/// QLIKE loss `mean(ln h + r̃²/h)` of variance forecasts against squared
/// demeaned returns.
pub fn qlike(variance: &[f64], returns: &[f64], mu: f64) -> Result<f64> {
    if variance.len() != returns.len() {
        return Err(Error::DimensionMismatch {
            expected: returns.len(),
            got: variance.len(),
        });
    }
    if returns.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let total: f64 = variance
        .iter()
        .zip(returns)
        .map(|(h, r)| h.ln() + (r - mu) * (r - mu) / h)
        .sum();
    Ok(total / returns.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::gen_garch;
    use rand::{Rng, SeedableRng};

    #[test]
    fn filter_single_step() {
        let p = GarchParams::new(0.0, 0.1, 0.2, 0.7);
        let path = garch_filter(&p, &[1.0, 0.0], 1.0).unwrap();
        assert!((path[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn filter_constant_variance() {
        let p = GarchParams::new(0.0, 0.3, 0.0, 0.0);
        let path = garch_filter(&p, &[1.0, -2.0, 0.5, 3.0], 5.0).unwrap();
        assert_eq!(path, vec![5.0, 0.3, 0.3, 0.3]);
    }

    #[test]
    fn filter_matches_brute_recursion() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let p = GarchParams::new(
                rng.random_range(-0.1..0.1),
                rng.random_range(0.01..0.5),
                rng.random_range(0.0..0.3),
                rng.random_range(0.0..0.69),
            );
            let r: Vec<f64> = (0..12).map(|_| rng.random_range(-2.0..2.0)).collect();
            let init = rng.random_range(0.1..2.0);
            let got = garch_filter(&p, &r, init).unwrap();
            let mut s = vec![init];
            for t in 1..12 {
                let e = r[t - 1] - p.mu;
                s.push(p.alpha0 + p.alpha1 * e.powi(2) + p.beta1 * s[t - 1]);
            }
            for (a, b) in got.iter().zip(&s) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn filter_rejects_invalid() {
        assert!(garch_filter(&GarchParams::new(0.0, 0.0, 0.1, 0.1), &[1.0], 1.0).is_err());
        assert!(garch_filter(&GarchParams::new(0.0, 0.1, -0.1, 0.1), &[1.0], 1.0).is_err());
        assert!(garch_filter(&GarchParams::new(0.0, 0.1, 0.1, 0.1), &[1.0], 0.0).is_err());
    }

    #[test]
    fn likelihood_of_standard_normal_at_zero() {
        let p = GarchParams::new(0.25, 0.5, 0.1, 0.1);
        let ll = garch_log_likelihood_with_init(&p, &[0.25], 1.0);
        assert!((ll + 0.918_938_533_204_672_7).abs() < 1e-12);
    }

    #[test]
    fn likelihood_two_terms_by_hand() {
        let p = GarchParams::new(0.01, 0.02, 0.1, 0.8);
        let r = [0.3, -0.2];
        let init = {
            let m = 0.05;
            ((0.3f64 - m).powi(2) + (-0.2f64 - m).powi(2)) / 1.0
        };
        let s1 = init;
        let s2 = 0.02 + 0.1 * (0.3f64 - 0.01).powi(2) + 0.8 * s1;
        let term = |r: f64, s: f64| -0.5 * (2.0 * std::f64::consts::PI * s).ln() - (r - 0.01).powi(2) / (2.0 * s);
        let expected = term(0.3, s1) + term(-0.2, s2);
        assert!((garch_log_likelihood(&p, &r) - expected).abs() < 1e-10);
    }

    #[test]
    fn invalid_params_give_sentinel() {
        let r = [0.1, -0.1, 0.2];
        assert_eq!(garch_log_likelihood(&GarchParams::new(0.0, 0.0, 0.1, 0.8), &r), f64::NEG_INFINITY);
        assert_eq!(garch_log_likelihood(&GarchParams::new(0.0, 0.1, 0.1, 0.8), &r[..1]), f64::NEG_INFINITY);
    }

    #[test]
    fn reparameterization_round_trip() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        for _ in 0..200 {
            let a1 = rng.random_range(1e-4..0.5);
            let b1 = rng.random_range(1e-4..(0.999 - a1));
            let p = GarchParams::new(rng.random_range(-1.0..1.0), rng.random_range(1e-6..2.0), a1, b1);
            let back = GarchParams::from_unconstrained(&p.to_unconstrained().unwrap());
            assert!((back.mu - p.mu).abs() < 1e-12);
            assert!((back.alpha0 - p.alpha0).abs() < 1e-12 * p.alpha0.max(1.0));
            assert!((back.alpha1 - p.alpha1).abs() < 1e-12);
            assert!((back.beta1 - p.beta1).abs() < 1e-12);
        }
        let extreme = GarchParams::from_unconstrained(&[0.0, 0.0, 800.0, -800.0]);
        assert!(extreme.persistence() <= 1.0 && extreme.alpha1.is_finite());
    }

    #[test]
    fn constant_series_is_degenerate() {
        assert!(matches!(fit_garch(&[0.01; 100]), Err(Error::DegenerateVariance(_))));
    }

    #[test]
    fn recovers_persistence() {
        let truth = GarchParams::new(0.0, 0.05, 0.10, 0.85);
        let r = gen_garch(&truth, 5000, 17).unwrap();
        let fit = fit_garch(&r).unwrap();
        assert!((fit.params.persistence() - 0.95).abs() < 0.03, "{:?}", fit.params);
        assert!(fit.loglik >= fit.start_loglik);
        assert!(fit.sigma2_path.iter().all(|s| *s > 0.0));
        assert_eq!(fit.sigma2_path.len(), r.len());
    }

    #[test]
    fn no_arch_effect_in_white_noise() {
        let truth = GarchParams::new(0.0, 1.0, 0.0, 0.0);
        let r = gen_garch(&truth, 5000, 29).unwrap();
        let fit = fit_garch(&r).unwrap();
        assert!(fit.params.alpha1 < 0.05, "{:?}", fit.params);
    }

    fn fit_with(params: GarchParams, resid: f64, s2: f64) -> GarchFit {
        GarchFit {
            params,
            sigma2_path: vec![s2],
            residuals: vec![resid],
            loglik: 0.0,
            start_params: params,
            start_loglik: 0.0,
            sigma2_init: s2,
            converged: true,
        }
    }

    #[test]
    fn forecast_converges_to_unconditional_variance() {
        let p = GarchParams::new(0.001, 0.05, 0.1, 0.85);
        let f = forecast_garch(&fit_with(p, 3.0, 4.0), 2000).unwrap();
        assert!((f.variance.last().unwrap() - 1.0).abs() < 1e-9);
        assert!(f.mean.iter().all(|m| *m == 0.001));
        let gaps: Vec<f64> = f.variance.iter().map(|v| (v - 1.0).abs()).collect();
        assert!(gaps.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn forecast_without_dynamics_is_alpha0() {
        let p = GarchParams::new(0.0, 0.4, 0.0, 0.0);
        let f = forecast_garch(&fit_with(p, 3.0, 4.0), 5).unwrap();
        assert_eq!(f.variance, vec![0.4; 5]);
        assert!(forecast_garch(&fit_with(p, 3.0, 4.0), 0).is_err());
    }

    #[test]
    fn first_forecast_is_one_more_filter_step() {
        let p = GarchParams::new(0.1, 0.05, 0.15, 0.7);
        let r = [0.5, -0.3, 1.2, 0.0, -0.8];
        let path = garch_filter(&p, &r, 0.6).unwrap();
        let fit = GarchFit {
            params: p,
            sigma2_path: path.clone(),
            residuals: r.iter().map(|v| v - p.mu).collect(),
            loglik: 0.0,
            start_params: p,
            start_loglik: 0.0,
            sigma2_init: 0.6,
            converged: true,
        };
        let f = forecast_garch(&fit, 1).unwrap();
        let mut extended = r.to_vec();
        extended.push(0.0);
        let ext = garch_filter(&p, &extended, 0.6).unwrap();
        assert!((f.variance[0] - ext[5]).abs() < 1e-15);
    }

    #[test]
    fn qlike_is_minimized_by_true_variance() {
        let r = [1.0, -1.0, 1.0, -1.0];
        let at_truth = qlike(&[1.0; 4], &r, 0.0).unwrap();
        assert!(qlike(&[2.0; 4], &r, 0.0).unwrap() > at_truth);
        assert!(qlike(&[0.5; 4], &r, 0.0).unwrap() > at_truth);
    }

    proptest::proptest! {
        #[test]
        fn filter_stays_positive(
            a0 in 1e-8f64..1.0, a1 in 0.0f64..1.0, b1 in 0.0f64..1.0,
            rs in proptest::collection::vec(-10.0f64..10.0, 1..60),
        ) {
            let p = GarchParams::new(0.0, a0, a1, b1);
            let path = garch_filter(&p, &rs, 1.0).unwrap();
            proptest::prop_assert!(path.iter().all(|s| *s > 0.0));
        }
    }
}
