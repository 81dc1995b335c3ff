//! Scalar Kalman filter for the AR(1) state-space form of the OU process,
//! and maximum likelihood estimation via the innovations decomposition.
//!
//! State:       x_k = alpha + beta x_{k-1} + eta_k,  eta ~ N(0, var_eta)
//! Observation: y_k = x_k + eps_k,                   eps ~ N(0, var_eps)
//!
//! One filter pass yields the innovations r_k and their variances S_k, whose
//! Gaussian log-density sums to the exact joint log-likelihood of the
//! observations. Maximizing that over (log theta, mu, log sigma) with
//! Nelder-Mead gives the MLE.

use crate::error::{Error, Result};
use crate::ols;
use crate::optim::{minimize, NelderMeadConfig};
use crate::report::{EstimateReport, Method};
use crate::simulate::PathSet;
use crate::util::Accumulator;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Full filter output over one observation sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct KalmanRun {
    /// Posterior means x_{k|k}.
    pub filtered_mean: Vec<f64>,
    /// Posterior variances P_{k|k}.
    pub filtered_var: Vec<f64>,
    /// Innovations r_k = y_k - x_{k|k-1}.
    pub innovations: Vec<f64>,
    /// Innovation variances S_k.
    pub innovation_var: Vec<f64>,
    /// Innovations log-likelihood, sum of -0.5 (ln 2 pi S_k + r_k^2 / S_k).
    pub loglik: f64,
}

fn validate_noise(var_eta: f64, var_eps: f64, init_var: f64) -> Result<()> {
    if !(var_eta >= 0.0) || !var_eta.is_finite() {
        return Err(Error::InvalidParam {
            name: "var_eta",
            reason: "must be >= 0",
            value: var_eta,
        });
    }
    if !(var_eps >= 0.0) || !var_eps.is_finite() {
        return Err(Error::InvalidParam {
            name: "var_eps",
            reason: "must be >= 0",
            value: var_eps,
        });
    }
    if var_eta == 0.0 && var_eps == 0.0 {
        return Err(Error::InvalidParam {
            name: "var_eta",
            reason: "must not be zero together with var_eps",
            value: 0.0,
        });
    }
    if !(init_var >= 0.0) || !init_var.is_finite() {
        return Err(Error::InvalidParam {
            name: "init_var",
            reason: "must be >= 0",
            value: init_var,
        });
    }
    Ok(())
}

/// Runs the filter over `observations`, treating (init_mean, init_var) as the
/// posterior one step before the first observation, and returns all
/// per-step sequences plus the log-likelihood.
pub fn kalman_filter(
    observations: &[f64],
    alpha: f64,
    beta: f64,
    var_eta: f64,
    var_eps: f64,
    init_mean: f64,
    init_var: f64,
) -> Result<KalmanRun> {
    validate_noise(var_eta, var_eps, init_var)?;
    let n = observations.len();
    let mut run = KalmanRun {
        filtered_mean: Vec::with_capacity(n),
        filtered_var: Vec::with_capacity(n),
        innovations: Vec::with_capacity(n),
        innovation_var: Vec::with_capacity(n),
        loglik: 0.0,
    };
    let mut mean = init_mean;
    let mut p = init_var;
    let mut ll = Accumulator::new();
    for &y in observations {
        let mean_pred = alpha + beta * mean;
        let p_pred = beta * beta * p + var_eta;
        let s = p_pred + var_eps;
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::NumericalBreakdown {
                what: "nonpositive innovation variance",
            });
        }
        let r = y - mean_pred;
        let gain = p_pred / s;
        debug_assert!((0.0..=1.0).contains(&gain));
        mean = mean_pred + gain * r;
        p = p_pred * (1.0 - gain);
        debug_assert!(p >= 0.0);
        ll.add(-0.5 * (LN_2PI + s.ln() + r * r / s));
        run.filtered_mean.push(mean);
        run.filtered_var.push(p);
        run.innovations.push(r);
        run.innovation_var.push(s);
    }
    run.loglik = ll.total();
    Ok(run)
}

/// Log-likelihood only; same recursion as `kalman_filter` without the
/// per-step storage.
pub fn kalman_loglik(
    observations: &[f64],
    alpha: f64,
    beta: f64,
    var_eta: f64,
    var_eps: f64,
    init_mean: f64,
    init_var: f64,
) -> Result<f64> {
    validate_noise(var_eta, var_eps, init_var)?;
    let mut mean = init_mean;
    let mut p = init_var;
    let mut ll = Accumulator::new();
    for &y in observations {
        let mean_pred = alpha + beta * mean;
        let p_pred = beta * beta * p + var_eta;
        let s = p_pred + var_eps;
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::NumericalBreakdown {
                what: "nonpositive innovation variance",
            });
        }
        let r = y - mean_pred;
        let gain = p_pred / s;
        mean = mean_pred + gain * r;
        p = p_pred * (1.0 - gain);
        ll.add(-0.5 * (LN_2PI + s.ln() + r * r / s));
    }
    Ok(ll.total())
}

/// Specialized log-likelihood for var_eps = 0, where the gain is 1 and the
/// posterior variance collapses to 0 after the first update: every residual
/// is y_k - alpha - beta y_{k-1} and all S_k beyond the first equal var_eta.
/// Used in the optimizer hot loop; `None` signals an infeasible candidate.
fn loglik_noise_free(path: &[f64], alpha: f64, beta: f64, var_eta: f64, init_var: f64) -> Option<f64> {
    debug_assert!(path.len() >= 2);
    let s0 = beta * beta * init_var + var_eta;
    if !(s0 > 0.0) || !(var_eta > 0.0) || !s0.is_finite() {
        return None;
    }
    let m = (path.len() - 1) as f64;
    let r0 = path[1] - alpha - beta * path[0];
    let mut ssr = Accumulator::new();
    for k in 2..path.len() {
        let r = path[k] - alpha - beta * path[k - 1];
        ssr.add(r * r);
    }
    let ll = -0.5
        * (m * LN_2PI
            + s0.ln()
            + r0 * r0 / s0
            + (m - 1.0) * var_eta.ln()
            + ssr.total() / var_eta);
    ll.is_finite().then_some(ll)
}

/// Observation-noise handling for the MLE.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ObsNoise {
    /// sigma_eps is known and held fixed (0 for noise-free data).
    Fixed(f64),
    /// sigma_eps is a fourth free parameter of the search.
    Free,
}

/// Optimizer budget for `kalman_mle`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MleConfig {
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for MleConfig {
    fn default() -> Self {
        Self {
            max_iters: 2000,
            tol: 1e-8,
        }
    }
}

/// Joint log-likelihood of all paths for one candidate parameter set;
/// the filter is initialized per path at x_0 = first point with the
/// candidate's stationary variance, and sums terms from k = 1 on.
fn total_loglik(paths: &PathSet, theta: f64, mu: f64, sigma: f64, sigma_eps: f64) -> Option<f64> {
    if !(theta > 0.0 && sigma > 0.0) || !theta.is_finite() || !sigma.is_finite() {
        return None;
    }
    let stationary_var = sigma * sigma / (2.0 * theta);
    let beta = (-theta * paths.grid().dt()).exp();
    let var_eta = stationary_var * (1.0 - beta * beta);
    let alpha = mu * (1.0 - beta);
    let var_eps = sigma_eps * sigma_eps;
    let mut total = Accumulator::new();
    for p in 0..paths.n_paths() {
        let row = paths.path(p);
        let ll = if var_eps == 0.0 {
            loglik_noise_free(row, alpha, beta, var_eta, stationary_var)?
        } else {
            kalman_loglik(&row[1..], alpha, beta, var_eta, var_eps, row[0], stationary_var).ok()?
        };
        total.add(ll);
    }
    let total = total.total();
    total.is_finite().then_some(total)
}

/// Maximum likelihood estimation of (mu, theta, sigma) by Nelder-Mead over
/// (log theta, mu, log sigma), warm-started from the OLS fit. Diagnostics
/// carry loglik, loglik_start, iterations, and the converged flag.
pub fn kalman_mle(paths: &PathSet, obs_noise: ObsNoise, cfg: &MleConfig) -> Result<EstimateReport> {
    if let ObsNoise::Fixed(v) = obs_noise {
        if !(v >= 0.0) || !v.is_finite() {
            return Err(Error::InvalidParam {
                name: "obs_noise",
                reason: "must be >= 0",
                value: v,
            });
        }
    }

    let warm = ols::recover_params(&ols::ols_fit(paths)?, paths.grid().dt())?;
    let theta0 = warm.theta_hat;
    let mu0 = warm.mu_hat;
    let sigma0 = warm.sigma_hat.max(1e-4);

    let mut x0 = vec![theta0.ln(), mu0, sigma0.ln()];
    if obs_noise == ObsNoise::Free {
        x0.push((0.1 * sigma0).max(1e-3).ln());
    }

    let objective = |x: &[f64]| -> f64 {
        let theta = x[0].exp();
        let mu = x[1];
        let sigma = x[2].exp();
        let sigma_eps = match obs_noise {
            ObsNoise::Fixed(v) => v,
            ObsNoise::Free => x[3].exp(),
        };
        match total_loglik(paths, theta, mu, sigma, sigma_eps) {
            Some(ll) => -ll,
            None => f64::INFINITY,
        }
    };

    let loglik_start = -objective(&x0);
    let out = minimize(objective, &x0, &NelderMeadConfig {
        max_iters: cfg.max_iters,
        tol: cfg.tol,
        init_step: 0.1,
    });

    let theta = out.x[0].exp();
    let mu = out.x[1];
    let sigma = out.x[2].exp();
    if !(theta.is_finite() && mu.is_finite() && sigma.is_finite() && out.fx.is_finite()) {
        return Err(Error::NumericalBreakdown {
            what: "optimizer returned non-finite estimates",
        });
    }
    let mut report = EstimateReport::new(Method::Kalman, mu, theta, sigma)
        .with("loglik", -out.fx)
        .with("loglik_start", loglik_start)
        .with("iterations", out.iterations as f64)
        .with("converged", if out.converged { 1.0 } else { 0.0 });
    if obs_noise == ObsNoise::Free {
        report = report.with("sigma_eps_hat", out.x[3].exp());
    }
    if !out.converged {
        return Err(Error::DidNotConverge {
            iterations: out.iterations,
            diameter: out.diameter,
            best: Box::new(report),
        });
    }
    Ok(report)
}
