//! Independent oracles shared by the integration suites: a double-double
//! normal-equations solver for the pooled regression, a dense joint-Gaussian
//! log-likelihood for the Kalman filter, and a finite-difference gradient
//! checker for the network. Each recomputes the quantity under test by a
//! different algorithm than the library uses.

#![allow(dead_code)]

use oukit::mlp::matrix::Matrix;
use oukit::mlp::{forward, loss_and_backward, MlpModel};
use oukit::simulate::PathSet;

/// Double-double value: an unevaluated sum hi + lo with |lo| <= ulp(hi)/2,
/// giving roughly 32 significant decimal digits.
#[derive(Debug, Clone, Copy)]
pub struct Dd {
    hi: f64,
    lo: f64,
}

fn two_sum(a: f64, b: f64) -> Dd {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    Dd { hi: s, lo: err }
}

fn two_prod(a: f64, b: f64) -> Dd {
    let p = a * b;
    let e = f64::mul_add(a, b, -p);
    Dd { hi: p, lo: e }
}

impl Dd {
    pub fn from_f64(x: f64) -> Dd {
        Dd { hi: x, lo: 0.0 }
    }

    pub fn zero() -> Dd {
        Dd { hi: 0.0, lo: 0.0 }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }

    pub fn add(self, other: Dd) -> Dd {
        let s = two_sum(self.hi, other.hi);
        let lo = s.lo + self.lo + other.lo;
        let t = two_sum(s.hi, lo);
        Dd { hi: t.hi, lo: t.lo }
    }

    pub fn add_f64(self, x: f64) -> Dd {
        self.add(Dd::from_f64(x))
    }

    pub fn sub(self, other: Dd) -> Dd {
        self.add(other.neg())
    }

    pub fn mul(self, other: Dd) -> Dd {
        let p = two_prod(self.hi, other.hi);
        let lo = p.lo + self.hi * other.lo + self.lo * other.hi;
        let t = two_sum(p.hi, lo);
        Dd { hi: t.hi, lo: t.lo }
    }

    pub fn mul_f64(self, x: f64) -> Dd {
        self.mul(Dd::from_f64(x))
    }

    /// Quotient by one Newton refinement of the hi-word division.
    pub fn div(self, other: Dd) -> Dd {
        let q0 = self.hi / other.hi;
        let r = self.sub(other.mul_f64(q0));
        let q1 = r.hi / other.hi;
        let r2 = r.sub(other.mul_f64(q1));
        let q2 = r2.hi / other.hi;
        two_sum(q0, q1).add_f64(q2)
    }
}

/// Pooled AR(1) regression solved through the uncentered normal equations in
/// double-double arithmetic: beta = (n Sxy - Sx Sy) / (n Sxx - Sx^2),
/// alpha = (Sy - beta Sx) / n, residual variance with denominator n - 2.
/// A deliberately different algebraic route than the library's centered
/// two-pass computation.
pub fn ols_oracle(paths: &PathSet) -> (f64, f64, f64) {
    let n_steps = paths.grid().n_steps();
    let mut sx = Dd::zero();
    let mut sy = Dd::zero();
    let mut sxx = Dd::zero();
    let mut sxy = Dd::zero();
    let mut n = 0u64;
    for p in 0..paths.n_paths() {
        let row = paths.path(p);
        for k in 0..n_steps {
            let (x, y) = (row[k], row[k + 1]);
            sx = sx.add_f64(x);
            sy = sy.add_f64(y);
            sxx = sxx.add(two_prod(x, x));
            sxy = sxy.add(two_prod(x, y));
            n += 1;
        }
    }
    let nf = n as f64;
    let den = sxx.mul_f64(nf).sub(sx.mul(sx));
    let num = sxy.mul_f64(nf).sub(sx.mul(sy));
    let beta = num.div(den);
    let alpha = sy.sub(beta.mul(sx)).div(Dd::from_f64(nf));

    let mut rss = Dd::zero();
    for p in 0..paths.n_paths() {
        let row = paths.path(p);
        for k in 0..n_steps {
            let e = Dd::from_f64(row[k + 1])
                .sub(alpha)
                .sub(beta.mul_f64(row[k]));
            rss = rss.add(e.mul(e));
        }
    }
    let resid_var = rss.div(Dd::from_f64(nf - 2.0));
    (alpha.to_f64(), beta.to_f64(), resid_var.to_f64())
}

/// Joint-Gaussian log-likelihood of an observation sequence under the same
/// state-space model the Kalman filter assumes, evaluated the brute-force
/// way: build the full covariance matrix and use a Cholesky factorization.
///
/// The state at step 0 (one step before the first observation) is
/// N(init_mean, init_var); x_{k+1} = alpha + beta x_k + eta, y_k = x_k + eps.
pub fn dense_kalman_loglik(
    obs: &[f64],
    alpha: f64,
    beta: f64,
    var_eta: f64,
    var_eps: f64,
    init_mean: f64,
    init_var: f64,
) -> f64 {
    let m = obs.len();
    assert!(m > 0 && m <= 64, "oracle sized for short sequences");

    let mut mean = vec![0.0; m];
    let mut var = vec![0.0; m];
    let mut prev_mean = init_mean;
    let mut prev_var = init_var;
    for k in 0..m {
        prev_mean = alpha + beta * prev_mean;
        prev_var = beta * beta * prev_var + var_eta;
        mean[k] = prev_mean;
        var[k] = prev_var;
    }

    let mut cov = vec![vec![0.0; m]; m];
    for j in 0..m {
        for k in j..m {
            // Cov(x_j, x_k) = beta^(k-j) Var(x_j) for k >= j.
            let c = beta.powi((k - j) as i32) * var[j];
            cov[j][k] = c;
            cov[k][j] = c;
        }
        cov[j][j] += var_eps;
    }

    // Cholesky: cov = L L^T, lower triangular.
    let mut l = vec![vec![0.0; m]; m];
    for i in 0..m {
        for j in 0..=i {
            let mut s = cov[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                assert!(s > 0.0, "covariance not positive definite");
                l[i][j] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }

    // Solve L z = (obs - mean); loglik from |z|^2 and the diagonal of L.
    let mut z = vec![0.0; m];
    for i in 0..m {
        let mut s = obs[i] - mean[i];
        for k in 0..i {
            s -= l[i][k] * z[k];
        }
        z[i] = s / l[i][i];
    }
    let ln_det: f64 = l.iter().enumerate().map(|(i, row)| row[i].ln()).sum();
    let quad: f64 = z.iter().map(|v| v * v).sum();
    let ln_2pi = (2.0 * std::f64::consts::PI).ln();
    -0.5 * (m as f64 * ln_2pi + quad) - ln_det
}

/// Exact conditional distribution of the state x_k given observations
/// y_0..y_k, computed by conditioning the dense joint Gaussian directly:
/// mean_k + c^T S^-1 (y - mean_y), var_k - c^T S^-1 c, where c is the
/// cross-covariance vector and S the observation covariance. This is what
/// the filter's (filtered_mean, filtered_var) at step k must equal.
pub fn dense_filtered_posterior(
    obs: &[f64],
    upto: usize,
    alpha: f64,
    beta: f64,
    var_eta: f64,
    var_eps: f64,
    init_mean: f64,
    init_var: f64,
) -> (f64, f64) {
    assert!(upto < obs.len() && obs.len() <= 64);
    let m = upto + 1;

    let mut mean = vec![0.0; m];
    let mut var = vec![0.0; m];
    let mut prev_mean = init_mean;
    let mut prev_var = init_var;
    for k in 0..m {
        prev_mean = alpha + beta * prev_mean;
        prev_var = beta * beta * prev_var + var_eta;
        mean[k] = prev_mean;
        var[k] = prev_var;
    }

    let mut cov = vec![vec![0.0; m]; m];
    for j in 0..m {
        for k in j..m {
            let c = beta.powi((k - j) as i32) * var[j];
            cov[j][k] = c;
            cov[k][j] = c;
        }
        cov[j][j] += var_eps;
    }
    let cross: Vec<f64> = (0..m).map(|j| beta.powi((upto - j) as i32) * var[j]).collect();

    let mut l = vec![vec![0.0; m]; m];
    for i in 0..m {
        for j in 0..=i {
            let mut s = cov[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                assert!(s > 0.0, "covariance not positive definite");
                l[i][j] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    let solve = |rhs: &[f64]| -> Vec<f64> {
        let mut z = vec![0.0; m];
        for i in 0..m {
            let mut s = rhs[i];
            for k in 0..i {
                s -= l[i][k] * z[k];
            }
            z[i] = s / l[i][i];
        }
        z
    };
    let resid: Vec<f64> = (0..m).map(|j| obs[j] - mean[j]).collect();
    let zc = solve(&cross);
    let zr = solve(&resid);
    let adj: f64 = zc.iter().zip(&zr).map(|(a, b)| a * b).sum();
    let red: f64 = zc.iter().map(|v| v * v).sum();
    (mean[upto] + adj, var[upto] - red)
}

/// Per-neuron scalar-loop forward pass: no matrix kernels, no batching
/// tricks. ReLU on hidden layers, identity on the output layer.
pub fn naive_forward(model: &MlpModel, batch: &Matrix) -> Matrix {
    let n_layers = model.weights.len();
    let mut out = Matrix::zeros(batch.rows, model.layer_dims[n_layers]);
    for r in 0..batch.rows {
        let mut act: Vec<f64> = batch.row(r).to_vec();
        for l in 0..n_layers {
            let w = &model.weights[l];
            let mut next = vec![0.0; w.rows];
            for (j, nj) in next.iter_mut().enumerate() {
                let mut z = model.biases[l][j];
                for (i, a) in act.iter().enumerate() {
                    z += w.get(j, i) * a;
                }
                *nj = if l + 1 < n_layers { z.max(0.0) } else { z };
            }
            act = next;
        }
        for (c, v) in act.iter().enumerate() {
            out.set(r, c, *v);
        }
    }
    out
}

/// Outcome of a finite-difference sweep over every parameter of a model.
#[derive(Debug, Clone, Copy)]
pub struct GradCheck {
    pub max_rel_err: f64,
    pub checked: usize,
    pub skipped: usize,
}

fn relu_mask_changed_or_near_kink(a: &MlpModel, b: &MlpModel, batch: &Matrix, tol: f64) -> bool {
    let (_, ca) = forward(a, batch).unwrap();
    let (_, cb) = forward(b, batch).unwrap();
    let hidden = ca.pre_activations.len() - 1;
    for l in 0..hidden {
        let za = &ca.pre_activations[l].data;
        let zb = &cb.pre_activations[l].data;
        for (x, y) in za.iter().zip(zb) {
            if (*x > 0.0) != (*y > 0.0) || x.abs() < tol || y.abs() < tol {
                return true;
            }
        }
    }
    false
}

/// Central-difference check of every weight and bias gradient. Components
/// whose perturbation crosses or lands within 1e-7 of a ReLU kink are skipped:
/// the loss is not differentiable there, so the comparison is meaningless.
pub fn gradient_check(model: &MlpModel, batch: &Matrix, targets: &Matrix, h: f64) -> GradCheck {
    let (_, grads) = loss_and_backward(model, batch, targets).unwrap();
    let mut max_rel_err = 0.0f64;
    let mut checked = 0;
    let mut skipped = 0;

    let mut check_one = |plus: &MlpModel, minus: &MlpModel, analytic: f64| {
        if relu_mask_changed_or_near_kink(plus, minus, batch, 1e-7) {
            skipped += 1;
            return;
        }
        let lp = loss_and_backward(plus, batch, targets).unwrap().0;
        let lm = loss_and_backward(minus, batch, targets).unwrap().0;
        let numeric = (lp - lm) / (2.0 * h);
        let rel = (numeric - analytic).abs() / (numeric.abs() + analytic.abs()).max(1e-8);
        max_rel_err = max_rel_err.max(rel);
        checked += 1;
    };

    for l in 0..model.weights.len() {
        for i in 0..model.weights[l].data.len() {
            let mut plus = model.clone();
            let mut minus = model.clone();
            plus.weights[l].data[i] += h;
            minus.weights[l].data[i] -= h;
            check_one(&plus, &minus, grads.d_weights[l].data[i]);
        }
        for i in 0..model.biases[l].len() {
            let mut plus = model.clone();
            let mut minus = model.clone();
            plus.biases[l][i] += h;
            minus.biases[l][i] -= h;
            check_one(&plus, &minus, grads.d_biases[l][i]);
        }
    }
    GradCheck {
        max_rel_err,
        checked,
        skipped,
    }
}
