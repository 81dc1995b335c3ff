//! Pooled AR(1) least squares and closed-form parameter recovery.
//!
//! Exact discretization makes the OU process an AR(1) model
//! x_{k+1} = alpha + beta x_k + eta_k with alpha = mu (1 - beta),
//! beta = e^{-theta dt}, Var(eta) = (sigma^2 / 2 theta)(1 - beta^2).
//! Fitting (alpha, beta) by least squares over all transitions of all paths
//! and inverting that map recovers (mu_hat, theta_hat, sigma_hat).

use crate::error::{BetaSide, Error, Result};
use crate::report::{EstimateReport, Method};
use crate::simulate::PathSet;
use crate::util::Accumulator;

/// Variance threshold below which the pooled predictor is considered constant.
pub const DEGENERACY_THRESHOLD: f64 = 1e-14;

/// Pooled AR(1) regression coefficients and residual variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegressionFit {
    /// Intercept alpha.
    pub alpha: f64,
    /// Slope beta.
    pub beta: f64,
    /// Residual variance with denominator n_obs - 2.
    pub resid_var: f64,
    /// Number of pooled transitions.
    pub n_obs: usize,
}

/// Least-squares fit of x_{k+1} on x_k pooled over every path and step.
///
/// Two-pass centered normal equations with compensated sums, plus a third
/// pass for residuals so a noiseless set reports resid_var ~ 0 instead of
/// cancellation junk.
pub fn ols_fit(paths: &PathSet) -> Result<RegressionFit> {
    let n_steps = paths.grid().n_steps();
    if n_steps < 1 {
        return Err(Error::TooFewObservations { needed: 3, got: 0 });
    }
    let n_obs = paths.n_paths() * n_steps;
    if n_obs < 3 {
        return Err(Error::TooFewObservations {
            needed: 3,
            got: n_obs,
        });
    }
    let n = n_obs as f64;

    let (mut sx, mut sy) = (Accumulator::new(), Accumulator::new());
    for p in 0..paths.n_paths() {
        let row = paths.path(p);
        for k in 0..n_steps {
            sx.add(row[k]);
            sy.add(row[k + 1]);
        }
    }
    let mean_x = sx.total() / n;
    let mean_y = sy.total() / n;

    let (mut sxx, mut sxy) = (Accumulator::new(), Accumulator::new());
    for p in 0..paths.n_paths() {
        let row = paths.path(p);
        for k in 0..n_steps {
            let dx = row[k] - mean_x;
            sxx.add(dx * dx);
            sxy.add(dx * (row[k + 1] - mean_y));
        }
    }
    let sxx = sxx.total();
    let predictor_var = sxx / (n - 1.0);
    if predictor_var < DEGENERACY_THRESHOLD {
        return Err(Error::DegenerateDesign {
            variance: predictor_var,
            threshold: DEGENERACY_THRESHOLD,
        });
    }

    let beta = sxy.total() / sxx;
    let alpha = mean_y - beta * mean_x;

    let mut ssr = Accumulator::new();
    for p in 0..paths.n_paths() {
        let row = paths.path(p);
        for k in 0..n_steps {
            let r = row[k + 1] - alpha - beta * row[k];
            ssr.add(r * r);
        }
    }
    let resid_var = ssr.total() / (n - 2.0);

    Ok(RegressionFit {
        alpha,
        beta,
        resid_var,
        n_obs,
    })
}

/// Inverts the AR(1) map: theta_hat = -ln(beta)/dt, mu_hat = alpha/(1-beta),
/// sigma_hat = sqrt(resid_var * 2 theta_hat / (1 - beta^2)).
pub fn recover_params(fit: &RegressionFit, dt: f64) -> Result<EstimateReport> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidParam {
            name: "dt",
            reason: "must be > 0",
            value: dt,
        });
    }
    if !(fit.beta > 0.0) {
        return Err(Error::BetaOutOfRange {
            beta: fit.beta,
            side: BetaSide::NonPositive,
        });
    }
    if fit.beta >= 1.0 {
        return Err(Error::BetaOutOfRange {
            beta: fit.beta,
            side: BetaSide::UnitRootOrAbove,
        });
    }
    let theta = -fit.beta.ln() / dt;
    let mu = fit.alpha / (1.0 - fit.beta);
    let sigma = if fit.resid_var == 0.0 {
        0.0
    } else {
        (fit.resid_var * 2.0 * theta / (1.0 - fit.beta * fit.beta)).sqrt()
    };
    if !(theta.is_finite() && mu.is_finite() && sigma.is_finite()) {
        return Err(Error::NumericalBreakdown {
            what: "non-finite recovered parameters",
        });
    }
    Ok(EstimateReport::new(Method::Ols, mu, theta, sigma)
        .with("alpha", fit.alpha)
        .with("beta", fit.beta)
        .with("resid_var", fit.resid_var)
        .with("n_obs", fit.n_obs as f64))
}
