//! Native tests of the wasm exports: the bindings are plain functions over
//! strings and numbers, so everything is verifiable without a browser.

use oukit_wasm::{estimate_params_json, simulate_paths_json, step_coefficients_json, MAX_STEPS};
use serde_json::Value;

fn parse(s: &str) -> Value {
    serde_json::from_str(s).expect("export returned valid JSON")
}

#[test]
fn simulate_returns_expected_shape_and_is_deterministic() {
    let a = simulate_paths_json(3.0, 0.5, 0.5, 0.0, 1.0, 200, 3, 42);
    let b = simulate_paths_json(3.0, 0.5, 0.5, 0.0, 1.0, 200, 3, 42);
    assert_eq!(a, b);

    let v = parse(&a);
    assert!(v.get("error").is_none(), "unexpected error: {v}");
    assert_eq!(v["t"].as_array().unwrap().len(), 201);
    let paths = v["paths"].as_array().unwrap();
    assert_eq!(paths.len(), 3);
    for p in paths {
        assert_eq!(p.as_array().unwrap().len(), 201);
        assert_eq!(p[0].as_f64().unwrap(), 0.0);
    }

    let other_seed = simulate_paths_json(3.0, 0.5, 0.5, 0.0, 1.0, 200, 3, 43);
    assert_ne!(a, other_seed);
}

#[test]
fn noiseless_simulation_follows_the_analytic_mean() {
    let v = parse(&simulate_paths_json(3.0, 0.5, 0.0, 2.0, 1.0, 100, 2, 1));
    let t = v["t"].as_array().unwrap();
    for p in v["paths"].as_array().unwrap() {
        let p = p.as_array().unwrap();
        for (ti, pi) in t.iter().zip(p) {
            let mean = 0.5 + 1.5 * (-3.0 * ti.as_f64().unwrap()).exp();
            assert!((pi.as_f64().unwrap() - mean).abs() < 1e-10);
        }
    }
}

#[test]
fn invalid_parameters_surface_as_error_json() {
    let v = parse(&simulate_paths_json(-1.0, 0.5, 0.5, 0.0, 1.0, 100, 2, 1));
    assert!(v["error"].as_str().unwrap().contains("theta"));

    let v = parse(&simulate_paths_json(3.0, 0.5, 0.5, 0.0, 1.0, MAX_STEPS + 1, 2, 1));
    assert!(v["error"].as_str().unwrap().contains("steps"));

    let v = parse(&simulate_paths_json(3.0, 0.5, 0.5, 0.0, 1.0, 100, 0, 1));
    assert!(v["error"].as_str().unwrap().contains("paths"));
}

#[test]
fn estimates_track_the_generating_parameters() {
    let v = parse(&estimate_params_json(3.0, 0.5, 0.5, 0.0, 5.0, 5000, 10, 7));
    for method in ["ols", "kalman"] {
        let est = &v[method];
        assert!(est.get("error").is_none(), "{method} failed: {est}");
        let theta = est["theta"].as_f64().unwrap();
        let mu = est["mu"].as_f64().unwrap();
        let sigma = est["sigma"].as_f64().unwrap();
        assert!((theta - 3.0).abs() < 1.5, "{method} theta {theta}");
        assert!((mu - 0.5).abs() < 0.3, "{method} mu {mu}");
        assert!((sigma - 0.5).abs() < 0.05, "{method} sigma {sigma}");
    }
    assert!(v["kalman"]["loglik"].as_f64().is_some());
}

#[test]
fn estimate_and_simulate_see_the_same_data() {
    // sigma = 0 makes the check exact: the estimate of the deterministic
    // trajectory must invert to the plotted parameters.
    let v = parse(&estimate_params_json(3.0, 0.5, 0.0, 0.0, 5.0, 1000, 2, 9));
    let ols = &v["ols"];
    assert!((ols["theta"].as_f64().unwrap() - 3.0).abs() < 1e-8);
    assert!((ols["mu"].as_f64().unwrap() - 0.5).abs() < 1e-8);
    assert!(ols["sigma"].as_f64().unwrap().abs() < 1e-8);
}

#[test]
fn step_coefficients_match_the_closed_forms() {
    let v = parse(&step_coefficients_json(3.0, 0.5, 0.005));
    let beta = v["beta"].as_f64().unwrap();
    assert!((beta - (-0.015f64).exp()).abs() < 1e-15);
    let stat = v["stationary_var"].as_f64().unwrap();
    assert!((stat - 0.25 / 6.0).abs() < 1e-15);
    let noise = v["noise_std"].as_f64().unwrap();
    assert!((noise - (stat * (1.0 - beta * beta)).sqrt()).abs() < 1e-15);

    let v = parse(&step_coefficients_json(3.0, 0.5, 0.0));
    assert!(v["error"].as_str().unwrap().contains("dt"));
    let v = parse(&step_coefficients_json(0.0, 0.5, 0.1));
    assert!(v["error"].as_str().unwrap().contains("theta"));
}
