//! From-scratch multilayer perceptron regressing (mu, theta, sigma) from a
//! featurized trajectory: Glorot-uniform init, ReLU hidden layers, a linear
//! 3-unit output, manual backprop, and bias-corrected Adam.

mod features;
pub mod matrix;
mod train;

pub use features::{featurize, FeatureVector};
pub use train::{train, HistoryRow, TrainConfig, TrainHistory};

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::report::{EstimateReport, Method};
use crate::simulate::PathSet;
use crate::util::atomic_write;
use matrix::{a_mul_wt, d_mul_w, dt_mul_a, Matrix};

/// Number of regression targets: (mu, theta, sigma).
pub const N_OUTPUTS: usize = 3;
/// Inference-time floor for theta_hat and sigma_hat.
pub const CLAMP_FLOOR: f64 = 1e-6;

/// Adam moment buffers, one pair per parameter tensor, plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m_weights: Vec<Matrix>,
    pub v_weights: Vec<Matrix>,
    pub m_biases: Vec<Vec<f64>>,
    pub v_biases: Vec<Vec<f64>>,
    pub step: u64,
}

/// The network. Layer l maps dim[l] -> dim[l+1] with weights[l] stored as
/// (dim[l+1] x dim[l]) and biases[l] of length dim[l+1]. Hidden layers apply
/// ReLU; the final layer is linear with exactly 3 outputs [mu, theta, sigma].
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub layer_dims: Vec<usize>,
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vec<f64>>,
    pub adam: AdamState,
}

impl MlpModel {
    /// Input feature count, layer_dims[0].
    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    /// Trajectory samples per feature vector (input dim minus the time-gap entry).
    pub fn feature_len(&self) -> usize {
        self.layer_dims[0] - 1
    }

    fn n_layers(&self) -> usize {
        self.weights.len()
    }
}

fn validate_dims(layer_dims: &[usize]) -> Result<()> {
    if layer_dims.len() < 2 {
        return Err(Error::InvalidConfig {
            reason: "layer_dims needs at least an input and an output layer".into(),
        });
    }
    if layer_dims.iter().any(|&d| d == 0) {
        return Err(Error::InvalidConfig {
            reason: "layer dimensions must be positive".into(),
        });
    }
    if *layer_dims.last().unwrap() != N_OUTPUTS {
        return Err(Error::InvalidConfig {
            reason: format!("output dimension must be {N_OUTPUTS}"),
        });
    }
    Ok(())
}

/// Glorot-uniform initialization: W entries uniform on +-sqrt(6/(fan_in+fan_out)),
/// biases zero, Adam state zeroed. Deterministic in the seed.
pub fn glorot_init(layer_dims: &[usize], seed: u64) -> Result<MlpModel> {
    validate_dims(layer_dims)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut weights = Vec::new();
    let mut biases = Vec::new();
    for l in 0..layer_dims.len() - 1 {
        let (fan_in, fan_out) = (layer_dims[l], layer_dims[l + 1]);
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let mut w = Matrix::zeros(fan_out, fan_in);
        for v in &mut w.data {
            *v = (2.0 * rng.random::<f64>() - 1.0) * bound;
        }
        weights.push(w);
        biases.push(vec![0.0; fan_out]);
    }
    let adam = AdamState {
        m_weights: weights.iter().map(|w| Matrix::zeros(w.rows, w.cols)).collect(),
        v_weights: weights.iter().map(|w| Matrix::zeros(w.rows, w.cols)).collect(),
        m_biases: biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        v_biases: biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        step: 0,
    };
    Ok(MlpModel {
        layer_dims: layer_dims.to_vec(),
        weights,
        biases,
        adam,
    })
}

/// Per-layer values retained by `forward` for the backward pass:
/// activations[l] is the input to layer l (activations[0] is the batch), and
/// pre_activations[l] is W_l activations[l] + b_l before ReLU.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub activations: Vec<Matrix>,
    pub pre_activations: Vec<Matrix>,
}

/// Batch forward pass: predictions are batch x 3.
pub fn forward(model: &MlpModel, batch: &Matrix) -> Result<(Matrix, ForwardCache)> {
    if batch.cols != model.input_dim() {
        return Err(Error::ShapeMismatch {
            what: "batch feature length",
            expected: model.input_dim(),
            got: batch.cols,
        });
    }
    let mut activations = vec![batch.clone()];
    let mut pre_activations = Vec::with_capacity(model.n_layers());
    for l in 0..model.n_layers() {
        let mut z = a_mul_wt(activations.last().unwrap(), &model.weights[l]);
        for i in 0..z.rows {
            let row = z.row_mut(i);
            for (v, b) in row.iter_mut().zip(&model.biases[l]) {
                *v += b;
            }
        }
        pre_activations.push(z.clone());
        if l + 1 < model.n_layers() {
            for v in &mut z.data {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
            activations.push(z);
        } else {
            return Ok((
                z,
                ForwardCache {
                    activations,
                    pre_activations,
                },
            ));
        }
    }
    unreachable!("validate_dims guarantees at least one layer");
}

/// Parameter gradients, same shapes as the model's weights and biases.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub d_weights: Vec<Matrix>,
    pub d_biases: Vec<Vec<f64>>,
}

/// Mean-squared-error loss over the batch and all 3 outputs, with exact
/// backprop gradients for every weight and bias.
pub fn loss_and_backward(
    model: &MlpModel,
    batch: &Matrix,
    targets: &Matrix,
) -> Result<(f64, Gradients)> {
    if targets.cols != N_OUTPUTS {
        return Err(Error::ShapeMismatch {
            what: "target width",
            expected: N_OUTPUTS,
            got: targets.cols,
        });
    }
    if targets.rows != batch.rows {
        return Err(Error::ShapeMismatch {
            what: "target rows",
            expected: batch.rows,
            got: targets.rows,
        });
    }
    let (predictions, cache) = forward(model, batch)?;

    let denom = (batch.rows * N_OUTPUTS) as f64;
    let mut loss = 0.0;
    let mut delta = Matrix::zeros(predictions.rows, predictions.cols);
    for i in 0..predictions.rows * predictions.cols {
        let diff = predictions.data[i] - targets.data[i];
        loss += diff * diff;
        delta.data[i] = 2.0 * diff / denom;
    }
    loss /= denom;

    let n = model.n_layers();
    let mut d_weights = vec![Matrix::zeros(0, 0); n];
    let mut d_biases = vec![Vec::new(); n];
    for l in (0..n).rev() {
        d_weights[l] = dt_mul_a(&delta, &cache.activations[l]);
        let mut db = vec![0.0; model.biases[l].len()];
        for i in 0..delta.rows {
            for (b, v) in db.iter_mut().zip(delta.row(i)) {
                *b += v;
            }
        }
        d_biases[l] = db;
        if l > 0 {
            let mut prev = d_mul_w(&delta, &model.weights[l]);
            // ReLU gate: pass gradient only where the pre-activation was positive.
            for (v, &z) in prev.data.iter_mut().zip(&cache.pre_activations[l - 1].data) {
                if z <= 0.0 {
                    *v = 0.0;
                }
            }
            delta = prev;
        }
    }
    Ok((loss, Gradients { d_weights, d_biases }))
}

/// One bias-corrected Adam update; increments the step counter.
pub fn adam_step(model: &mut MlpModel, grads: &Gradients, lr: f64, betas: (f64, f64), eps: f64) {
    let (b1, b2) = betas;
    let t = model.adam.step + 1;
    let c1 = 1.0 - b1.powi(t as i32);
    let c2 = 1.0 - b2.powi(t as i32);
    for l in 0..model.weights.len() {
        let w = &mut model.weights[l].data;
        let g = &grads.d_weights[l].data;
        let m = &mut model.adam.m_weights[l].data;
        let v = &mut model.adam.v_weights[l].data;
        for i in 0..w.len() {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            w[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + eps);
        }
        let bias = &mut model.biases[l];
        let gb = &grads.d_biases[l];
        let mb = &mut model.adam.m_biases[l];
        let vb = &mut model.adam.v_biases[l];
        for i in 0..bias.len() {
            mb[i] = b1 * mb[i] + (1.0 - b1) * gb[i];
            vb[i] = b2 * vb[i] + (1.0 - b2) * gb[i] * gb[i];
            bias[i] -= lr * (mb[i] / c1) / ((vb[i] / c2).sqrt() + eps);
        }
    }
    model.adam.step = t;
    debug_assert!(model.weights.iter().all(|w| w.data.iter().all(|v| v.is_finite())));
}

/// Featurizes every path, averages the per-path predictions, and clamps
/// theta_hat and sigma_hat to at least 1e-6.
pub fn predict_params(model: &MlpModel, paths: &PathSet) -> Result<EstimateReport> {
    let rows: Vec<Vec<f64>> = (0..paths.n_paths())
        .map(|p| featurize(paths.path(p), paths.grid(), model.feature_len()).map(|f| f.values))
        .collect::<Result<_>>()?;
    let batch = Matrix::from_rows(&rows);
    let (predictions, _) = forward(model, &batch)?;
    let mut mean = [0.0; N_OUTPUTS];
    for i in 0..predictions.rows {
        for (acc, v) in mean.iter_mut().zip(predictions.row(i)) {
            *acc += v;
        }
    }
    for v in &mut mean {
        *v /= predictions.rows as f64;
    }
    let [mu, theta, sigma] = mean;
    Ok(
        EstimateReport::new(Method::Nn, mu, theta.max(CLAMP_FLOOR), sigma.max(CLAMP_FLOOR))
            .with("n_paths", paths.n_paths() as f64),
    )
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    format: String,
    layer_dims: Vec<usize>,
    feature_len: usize,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
    config_hash: String,
}

const CHECKPOINT_FORMAT: &str = "oukit-mlp-v1";

/// Writes a self-describing JSON checkpoint with full-precision parameters.
pub fn save_checkpoint(model: &MlpModel, config_hash: &str, path: &Path) -> Result<()> {
    let file = CheckpointFile {
        format: CHECKPOINT_FORMAT.to_string(),
        layer_dims: model.layer_dims.clone(),
        feature_len: model.feature_len(),
        weights: model.weights.iter().map(|w| w.data.clone()).collect(),
        biases: model.biases.clone(),
        config_hash: config_hash.to_string(),
    };
    atomic_write(path, |w| {
        serde_json::to_writer(&mut *w, &file).map_err(|e| Error::Checkpoint {
            reason: e.to_string(),
        })?;
        writeln!(w)?;
        Ok(())
    })
}

/// Loads a checkpoint; the returned model has a fresh (zeroed) Adam state.
pub fn load_checkpoint(path: &Path) -> Result<(MlpModel, String)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: CheckpointFile = serde_json::from_str(&text).map_err(|e| Error::Checkpoint {
        reason: e.to_string(),
    })?;
    if file.format != CHECKPOINT_FORMAT {
        return Err(Error::Checkpoint {
            reason: format!("unsupported format `{}`", file.format),
        });
    }
    validate_dims(&file.layer_dims).map_err(|e| Error::Checkpoint {
        reason: e.to_string(),
    })?;
    if file.feature_len + 1 != file.layer_dims[0] {
        return Err(Error::Checkpoint {
            reason: format!(
                "feature_len {} does not match input dimension {}",
                file.feature_len, file.layer_dims[0]
            ),
        });
    }
    let mut model = glorot_init(&file.layer_dims, 0)?;
    if file.weights.len() != model.weights.len() || file.biases.len() != model.biases.len() {
        return Err(Error::Checkpoint {
            reason: "layer count mismatch".into(),
        });
    }
    for (l, (w, b)) in file.weights.iter().zip(&file.biases).enumerate() {
        if w.len() != model.weights[l].data.len() || b.len() != model.biases[l].len() {
            return Err(Error::Checkpoint {
                reason: format!("layer {l} parameter count mismatch"),
            });
        }
        if w.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Checkpoint {
                reason: format!("layer {l} contains non-finite parameters"),
            });
        }
        model.weights[l].data.copy_from_slice(w);
        model.biases[l].copy_from_slice(b);
    }
    Ok((model, file.config_hash))
}
