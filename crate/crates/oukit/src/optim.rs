//! Derivative-free Nelder-Mead simplex minimization.
//!
//! Standard coefficients: reflection 1, expansion 2, contraction 0.5,
//! shrink 0.5. Convergence is declared when the simplex bounding-box
//! diameter falls below the tolerance. Objectives may return infinity
//! (or NaN, ordered worst) to reject infeasible points.

/// Search configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadConfig {
    /// Iteration cap.
    pub max_iters: usize,
    /// Simplex diameter below which the search stops.
    pub tol: f64,
    /// Per-coordinate offset used to build the initial simplex.
    pub init_step: f64,
}

impl Default for NelderMeadConfig {
    fn default() -> Self {
        Self {
            max_iters: 2000,
            tol: 1e-8,
            init_step: 0.1,
        }
    }
}

/// Result of a Nelder-Mead run.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimOutcome {
    /// Best point found.
    pub x: Vec<f64>,
    /// Objective value at `x`.
    pub fx: f64,
    /// Iterations performed.
    pub iterations: usize,
    /// Whether the diameter criterion was met within the cap.
    pub converged: bool,
    /// Final simplex diameter.
    pub diameter: f64,
}

/// Orders values with NaN treated as worst, so poisoned vertices sink.
fn cmp_objective(a: f64, b: f64) -> std::cmp::Ordering {
    match a.partial_cmp(&b) {
        Some(o) => o,
        None => match (a.is_nan(), b.is_nan()) {
            (true, true) => std::cmp::Ordering::Equal,
            (true, false) => std::cmp::Ordering::Greater,
            (false, true) => std::cmp::Ordering::Less,
            (false, false) => unreachable!(),
        },
    }
}

fn diameter(simplex: &[Vec<f64>]) -> f64 {
    let dim = simplex[0].len();
    let mut d: f64 = 0.0;
    for j in 0..dim {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for v in simplex {
            lo = lo.min(v[j]);
            hi = hi.max(v[j]);
        }
        d = d.max(hi - lo);
    }
    d
}

/// Minimizes `f` starting from `x0`.
pub fn minimize(
    mut f: impl FnMut(&[f64]) -> f64,
    x0: &[f64],
    cfg: &NelderMeadConfig,
) -> OptimOutcome {
    let dim = x0.len();
    assert!(dim >= 1, "need at least one dimension");

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(dim + 1);
    simplex.push(x0.to_vec());
    for j in 0..dim {
        let mut v = x0.to_vec();
        v[j] += cfg.init_step;
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| f(v)).collect();

    let sort_simplex = |simplex: &mut Vec<Vec<f64>>, values: &mut Vec<f64>| {
        let mut order: Vec<usize> = (0..simplex.len()).collect();
        order.sort_by(|&a, &b| cmp_objective(values[a], values[b]));
        let new_simplex: Vec<Vec<f64>> = order.iter().map(|&i| simplex[i].clone()).collect();
        let new_values: Vec<f64> = order.iter().map(|&i| values[i]).collect();
        *simplex = new_simplex;
        *values = new_values;
    };
    sort_simplex(&mut simplex, &mut values);

    let mut iterations = 0;
    let mut converged = diameter(&simplex) < cfg.tol;
    while !converged && iterations < cfg.max_iters {
        iterations += 1;

        // Centroid of all vertices except the worst.
        let mut centroid = vec![0.0; dim];
        for v in &simplex[..dim] {
            for j in 0..dim {
                centroid[j] += v[j];
            }
        }
        for c in &mut centroid {
            *c /= dim as f64;
        }

        let worst = simplex[dim].clone();
        let reflected: Vec<f64> = (0..dim)
            .map(|j| centroid[j] + (centroid[j] - worst[j]))
            .collect();
        let f_reflected = f(&reflected);

        if cmp_objective(f_reflected, values[0]).is_lt() {
            // Better than the best: try expanding further.
            let expanded: Vec<f64> = (0..dim)
                .map(|j| centroid[j] + 2.0 * (centroid[j] - worst[j]))
                .collect();
            let f_expanded = f(&expanded);
            if cmp_objective(f_expanded, f_reflected).is_lt() {
                simplex[dim] = expanded;
                values[dim] = f_expanded;
            } else {
                simplex[dim] = reflected;
                values[dim] = f_reflected;
            }
        } else if cmp_objective(f_reflected, values[dim - 1]).is_lt() {
            simplex[dim] = reflected;
            values[dim] = f_reflected;
        } else {
            // Contract toward the centroid, on the better side of it.
            let toward = if cmp_objective(f_reflected, values[dim]).is_lt() {
                &reflected
            } else {
                &worst
            };
            let contracted: Vec<f64> = (0..dim)
                .map(|j| centroid[j] + 0.5 * (toward[j] - centroid[j]))
                .collect();
            let f_contracted = f(&contracted);
            if cmp_objective(f_contracted, values[dim].min(f_reflected)).is_lt() {
                simplex[dim] = contracted;
                values[dim] = f_contracted;
            } else {
                // Shrink everything toward the best vertex.
                let best = simplex[0].clone();
                for v in simplex.iter_mut().skip(1) {
                    for j in 0..dim {
                        v[j] = best[j] + 0.5 * (v[j] - best[j]);
                    }
                }
                for (i, v) in simplex.iter().enumerate().skip(1) {
                    values[i] = f(v);
                }
            }
        }
        sort_simplex(&mut simplex, &mut values);
        converged = diameter(&simplex) < cfg.tol;
    }

    OptimOutcome {
        x: simplex[0].clone(),
        fx: values[0],
        iterations,
        converged,
        diameter: diameter(&simplex),
    }
}
