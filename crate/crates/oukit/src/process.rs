//! Ornstein-Uhlenbeck domain types and analytic moments.
//!
//! The process is dX_t = theta (mu - X_t) dt + sigma dW_t. Its transition over
//! a step dt is Gaussian with mean mu + (X_t - mu) e^{-theta dt} and variance
//! (sigma^2 / 2 theta)(1 - e^{-2 theta dt}), which is what the simulator and
//! both classical estimators are built on.

use crate::error::{Error, Result};

/// Parameters of one OU process plus its initial state and time horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuParams {
    /// Mean-reversion rate theta (1/time), > 0.
    pub theta: f64,
    /// Long-term mean mu (state units).
    pub mu: f64,
    /// Volatility sigma (state units per sqrt-time), >= 0.
    pub sigma: f64,
    /// Initial state X_0.
    pub x0: f64,
    /// Total simulated time T, > 0.
    pub horizon: f64,
}

fn check(name: &'static str, value: f64, reason: &'static str, ok: bool) -> Result<()> {
    if value.is_finite() && ok {
        Ok(())
    } else {
        Err(Error::InvalidParam {
            name,
            reason: if value.is_finite() {
                reason
            } else {
                "must be finite"
            },
            value,
        })
    }
}

impl OuParams {
    pub fn new(theta: f64, mu: f64, sigma: f64, x0: f64, horizon: f64) -> Result<Self> {
        check("theta", theta, "must be > 0", theta > 0.0)?;
        check("mu", mu, "must be finite", true)?;
        check("sigma", sigma, "must be >= 0", sigma >= 0.0)?;
        check("x0", x0, "must be finite", true)?;
        check("horizon", horizon, "must be > 0", horizon > 0.0)?;
        Ok(Self {
            theta,
            mu,
            sigma,
            x0,
            horizon,
        })
    }

    /// E[X_t] = mu + (x0 - mu) e^{-theta t}.
    pub fn analytic_mean(&self, t: f64) -> f64 {
        debug_assert!(t >= 0.0);
        self.mu + (self.x0 - self.mu) * (-self.theta * t).exp()
    }

    /// Stationary covariance kernel Cov(X_t, X_s) = (sigma^2 / 2 theta) e^{-theta |t-s|}.
    pub fn analytic_cov(&self, t: f64, s: f64) -> f64 {
        debug_assert!(t >= 0.0 && s >= 0.0);
        self.stationary_var() * (-self.theta * (t - s).abs()).exp()
    }

    /// Long-run variance sigma^2 / (2 theta).
    pub fn stationary_var(&self) -> f64 {
        self.sigma * self.sigma / (2.0 * self.theta)
    }

    /// Exact-discretization coefficients over a step of size dt.
    pub fn step_coefficients(&self, dt: f64) -> StepCoefficients {
        debug_assert!(dt > 0.0);
        let beta = (-self.theta * dt).exp();
        let noise_var = self.stationary_var() * (1.0 - beta * beta);
        StepCoefficients {
            beta,
            noise_std: noise_var.sqrt(),
        }
    }
}

/// Coefficients of the exact transition X_{n+1} = mu + (X_n - mu) beta + noise_std eps_n.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepCoefficients {
    /// Autoregressive factor e^{-theta dt}, in (0, 1).
    pub beta: f64,
    /// Standard deviation of the transition noise, sqrt((sigma^2/2 theta)(1 - beta^2)).
    pub noise_std: f64,
}

/// Uniform time grid: n_steps update steps of size dt (n_steps + 1 grid points).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    n_steps: usize,
    dt: f64,
}

impl TimeGrid {
    pub fn new(n_steps: usize, dt: f64) -> Result<Self> {
        if n_steps < 1 {
            return Err(Error::InvalidParam {
                name: "n_steps",
                reason: "must be >= 1",
                value: n_steps as f64,
            });
        }
        check("dt", dt, "must be > 0", dt > 0.0)?;
        Ok(Self { n_steps, dt })
    }

    /// Grid spanning the params' horizon: dt = horizon / n_steps.
    pub fn for_params(params: &OuParams, n_steps: usize) -> Result<Self> {
        if n_steps < 1 {
            return Err(Error::InvalidParam {
                name: "n_steps",
                reason: "must be >= 1",
                value: n_steps as f64,
            });
        }
        Self::new(n_steps, params.horizon / n_steps as f64)
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Number of grid points, n_steps + 1.
    pub fn n_points(&self) -> usize {
        self.n_steps + 1
    }

    /// Time of grid point i.
    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.dt
    }
}
