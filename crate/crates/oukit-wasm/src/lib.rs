//! Browser bindings for the demo page. Every export takes plain numbers and
//! returns a JSON string: either the payload or `{"error": "..."}`. Keeping
//! the boundary to strings and numbers means the page needs no generated
//! class glue, and the same functions compile and test natively.
//!
//! The estimate operation re-simulates from the given seed instead of
//! holding state across calls, so estimates always refer to exactly the
//! trajectories the page is plotting.

use oukit::kalman::{kalman_mle, MleConfig, ObsNoise};
use oukit::ols::{ols_fit, recover_params};
use oukit::process::{OuParams, TimeGrid};
use oukit::report::EstimateReport;
use oukit::simulate::{simulate, PathSet};
use serde_json::json;
use wasm_bindgen::prelude::wasm_bindgen;

/// Upper bound on update steps per request, sized for an interactive page.
pub const MAX_STEPS: u32 = 5_000;
/// Upper bound on paths per request.
pub const MAX_PATHS: u32 = 10;

fn error_json(message: impl std::fmt::Display) -> String {
    json!({ "error": message.to_string() }).to_string()
}

fn build_paths(
    theta: f64,
    mu: f64,
    sigma: f64,
    x0: f64,
    horizon: f64,
    steps: u32,
    n_paths: u32,
    seed: u32,
) -> Result<PathSet, String> {
    if steps == 0 || steps > MAX_STEPS {
        return Err(format!("steps must be in 1..={MAX_STEPS}, got {steps}"));
    }
    if n_paths == 0 || n_paths > MAX_PATHS {
        return Err(format!("paths must be in 1..={MAX_PATHS}, got {n_paths}"));
    }
    let params = OuParams::new(theta, mu, sigma, x0, horizon).map_err(|e| e.to_string())?;
    let grid = TimeGrid::for_params(&params, steps as usize).map_err(|e| e.to_string())?;
    simulate(&params, &grid, n_paths as usize, seed as u64).map_err(|e| e.to_string())
}

/// Simulates paths and returns `{"t": [...], "paths": [[...], ...]}`.
#[wasm_bindgen]
pub fn simulate_paths_json(
    theta: f64,
    mu: f64,
    sigma: f64,
    x0: f64,
    horizon: f64,
    steps: u32,
    n_paths: u32,
    seed: u32,
) -> String {
    let set = match build_paths(theta, mu, sigma, x0, horizon, steps, n_paths, seed) {
        Ok(set) => set,
        Err(message) => return error_json(message),
    };
    let grid = set.grid();
    let t: Vec<f64> = (0..grid.n_points()).map(|i| grid.time(i)).collect();
    let paths: Vec<&[f64]> = (0..set.n_paths()).map(|p| set.path(p)).collect();
    json!({ "t": t, "paths": paths }).to_string()
}

fn report_json(report: &EstimateReport) -> serde_json::Value {
    let mut value = json!({
        "mu": report.mu_hat,
        "theta": report.theta_hat,
        "sigma": report.sigma_hat,
    });
    if let Some(loglik) = report.diagnostics.get("loglik") {
        value["loglik"] = json!(loglik);
    }
    value
}

/// Re-simulates the same data as `simulate_paths_json` and returns both
/// estimates: `{"ols": {...}, "kalman": {...}}`. A method that fails on the
/// given data reports `{"error": "..."}` in its slot instead.
#[wasm_bindgen]
pub fn estimate_params_json(
    theta: f64,
    mu: f64,
    sigma: f64,
    x0: f64,
    horizon: f64,
    steps: u32,
    n_paths: u32,
    seed: u32,
) -> String {
    let set = match build_paths(theta, mu, sigma, x0, horizon, steps, n_paths, seed) {
        Ok(set) => set,
        Err(message) => return error_json(message),
    };
    let ols = ols_fit(&set)
        .and_then(|fit| recover_params(&fit, set.grid().dt()))
        .map(|r| report_json(&r))
        .unwrap_or_else(|e| json!({ "error": e.to_string() }));
    let kalman = kalman_mle(&set, ObsNoise::Fixed(0.0), &MleConfig::default())
        .map(|r| report_json(&r))
        .unwrap_or_else(|e| json!({ "error": e.to_string() }));
    json!({ "ols": ols, "kalman": kalman }).to_string()
}

/// Exact-discretization coefficients for one step:
/// `{"beta": ..., "noise_std": ..., "stationary_var": ...}`.
#[wasm_bindgen]
pub fn step_coefficients_json(theta: f64, sigma: f64, dt: f64) -> String {
    if !(dt > 0.0) || !dt.is_finite() {
        return error_json(format!("dt must be > 0, got {dt}"));
    }
    let params = match OuParams::new(theta, 0.0, sigma, 0.0, 1.0) {
        Ok(p) => p,
        Err(e) => return error_json(e),
    };
    let coeffs = params.step_coefficients(dt);
    json!({
        "beta": coeffs.beta,
        "noise_std": coeffs.noise_std,
        "stationary_var": params.stationary_var(),
    })
    .to_string()
}
