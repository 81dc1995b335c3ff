//! Estimation results shared by all three methods.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};

/// Which estimator produced a report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Ols,
    Kalman,
    Nn,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Ols => "ols",
            Method::Kalman => "kalman",
            Method::Nn => "nn",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "ols" => Ok(Method::Ols),
            "kalman" => Ok(Method::Kalman),
            "nn" => Ok(Method::Nn),
            other => Err(Error::InvalidConfig {
                reason: format!("unknown method `{other}` (expected ols, kalman, or nn)"),
            }),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Point estimates of (mu, theta, sigma) plus method-specific diagnostics
/// such as loglik, iterations, or resid_var.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateReport {
    pub method: Method,
    pub mu_hat: f64,
    pub theta_hat: f64,
    pub sigma_hat: f64,
    pub diagnostics: BTreeMap<&'static str, f64>,
}

impl EstimateReport {
    pub fn new(method: Method, mu_hat: f64, theta_hat: f64, sigma_hat: f64) -> Self {
        Self {
            method,
            mu_hat,
            theta_hat,
            sigma_hat,
            diagnostics: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &'static str, value: f64) -> Self {
        self.diagnostics.insert(key, value);
        self
    }

    pub fn csv_header() -> &'static str {
        "method,paths,n_steps,horizon,seed,mu_hat,theta_hat,sigma_hat,loglik,converged"
    }

    /// One CSV row describing this estimate on a given data set. `seed` is
    /// empty for data whose generating seed is unknown (e.g. parsed CSV).
    pub fn to_csv_row(
        &self,
        paths: usize,
        n_steps: usize,
        horizon: f64,
        seed: Option<u64>,
    ) -> String {
        let seed = seed.map(|s| s.to_string()).unwrap_or_default();
        let loglik = self
            .diagnostics
            .get("loglik")
            .map(|v| v.to_string())
            .unwrap_or_default();
        let converged = match self.diagnostics.get("converged") {
            Some(v) => *v != 0.0,
            None => true,
        };
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.method, paths, n_steps, horizon, seed, self.mu_hat, self.theta_hat,
            self.sigma_hat, loglik, converged
        )
    }
}
