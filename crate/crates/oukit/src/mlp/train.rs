//! Supervised training of the MLP on simulated trajectories with known
//! parameters, drawn from a configurable prior.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::process::{OuParams, TimeGrid};
use crate::simulate::simulate;
use crate::util::{atomic_write, derive_seed};

use super::matrix::Matrix;
use super::{adam_step, featurize, forward, glorot_init, loss_and_backward, MlpModel, N_OUTPUTS};

const TAG_PARAMS: u16 = 0x4d01;
const TAG_SIM: u16 = 0x4d02;
const TAG_SHUFFLE: u16 = 0x4d03;
const TAG_INIT: u16 = 0x4d04;

const EVAL_CHUNK: usize = 512;

/// Everything `train` needs: the sampling prior for true parameters and
/// trajectory shapes, dataset sizes, architecture, and optimizer settings.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainConfig {
    pub prior_theta: (f64, f64),
    pub prior_mu: (f64, f64),
    pub prior_sigma: (f64, f64),
    pub prior_x0: (f64, f64),
    pub horizon_range: (f64, f64),
    pub n_steps_choices: Vec<usize>,
    pub hidden_dims: Vec<usize>,
    pub n_train: usize,
    pub n_val: usize,
    pub feature_len: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub adam_betas: (f64, f64),
    pub adam_eps: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            prior_theta: (0.5, 10.0),
            prior_mu: (-1.0, 2.0),
            prior_sigma: (0.1, 2.0),
            prior_x0: (-1.0, 2.0),
            horizon_range: (1.0, 5.0),
            n_steps_choices: vec![1000, 5000],
            hidden_dims: vec![128, 128],
            n_train: 20_000,
            n_val: 2_000,
            feature_len: 100,
            batch_size: 128,
            learning_rate: 1e-3,
            adam_betas: (0.9, 0.999),
            adam_eps: 1e-8,
            epochs: 30,
            seed: 0,
        }
    }
}

fn check_range(name: &'static str, (lo, hi): (f64, f64), positive: bool) -> Result<()> {
    if !lo.is_finite() || !hi.is_finite() || lo > hi {
        return Err(Error::InvalidConfig {
            reason: format!("{name} range [{lo}, {hi}] is not a finite interval"),
        });
    }
    if positive && lo <= 0.0 {
        return Err(Error::InvalidConfig {
            reason: format!("{name} range must have a positive lower bound, got {lo}"),
        });
    }
    Ok(())
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        check_range("theta", self.prior_theta, true)?;
        check_range("sigma", self.prior_sigma, true)?;
        check_range("mu", self.prior_mu, false)?;
        check_range("x0", self.prior_x0, false)?;
        check_range("horizon", self.horizon_range, true)?;
        if self.n_steps_choices.is_empty() {
            return Err(Error::InvalidConfig {
                reason: "n_steps_choices must not be empty".into(),
            });
        }
        if self.feature_len < 2 {
            return Err(Error::InvalidConfig {
                reason: "feature_len must be at least 2".into(),
            });
        }
        if let Some(&n) = self.n_steps_choices.iter().min() {
            if n + 1 < self.feature_len {
                return Err(Error::InvalidConfig {
                    reason: format!(
                        "shortest trajectory ({} points) cannot fill feature_len {}",
                        n + 1,
                        self.feature_len
                    ),
                });
            }
        }
        if self.n_train == 0 || self.n_val == 0 {
            return Err(Error::InvalidConfig {
                reason: "n_train and n_val must both be positive".into(),
            });
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig {
                reason: "batch_size must be at least 1".into(),
            });
        }
        if self.epochs == 0 {
            return Err(Error::InvalidConfig {
                reason: "epochs must be at least 1".into(),
            });
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::InvalidConfig {
                reason: format!("learning_rate must be positive, got {}", self.learning_rate),
            });
        }
        let (b1, b2) = self.adam_betas;
        if !(0.0..1.0).contains(&b1) || !(0.0..1.0).contains(&b2) {
            return Err(Error::InvalidConfig {
                reason: format!("adam betas must lie in [0, 1), got ({b1}, {b2})"),
            });
        }
        if !(self.adam_eps.is_finite() && self.adam_eps > 0.0) {
            return Err(Error::InvalidConfig {
                reason: format!("adam_eps must be positive, got {}", self.adam_eps),
            });
        }
        if self.hidden_dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidConfig {
                reason: "hidden layer widths must be positive".into(),
            });
        }
        Ok(())
    }

    /// Full layer dimension chain, input through the 3-unit output.
    pub fn layer_dims(&self) -> Vec<usize> {
        let mut dims = Vec::with_capacity(self.hidden_dims.len() + 2);
        dims.push(self.feature_len + 1);
        dims.extend_from_slice(&self.hidden_dims);
        dims.push(N_OUTPUTS);
        dims
    }

    /// SHA-256 of the canonical JSON serialization, for checkpoint provenance.
    pub fn config_hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// One evaluation of train and validation losses; epoch 0 is the pre-training
/// baseline of the freshly initialized model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryRow {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

/// Loss trajectory of a training run, one row per epoch plus the baseline.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainHistory {
    pub rows: Vec<HistoryRow>,
}

impl TrainHistory {
    pub fn csv_header() -> &'static str {
        "epoch,train_loss,val_loss"
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::from(Self::csv_header());
        out.push('\n');
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{}\n",
                row.epoch, row.train_loss, row.val_loss
            ));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let text = self.to_csv_string();
        atomic_write(path, |w| {
            w.write_all(text.as_bytes())?;
            Ok(())
        })
    }

    /// (epoch, loss) of the lowest validation loss.
    pub fn best_val(&self) -> Option<(usize, f64)> {
        self.rows
            .iter()
            .min_by(|a, b| a.val_loss.total_cmp(&b.val_loss))
            .map(|r| (r.epoch, r.val_loss))
    }
}

fn sample_uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

/// Simulates one labeled instance: parameters from the prior, one path, one
/// feature vector. Deterministic in (config.seed, index) alone.
fn make_instance(config: &TrainConfig, index: u64) -> Result<(Vec<f64>, [f64; N_OUTPUTS])> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, TAG_PARAMS, index));
    let theta = sample_uniform(&mut rng, config.prior_theta);
    let mu = sample_uniform(&mut rng, config.prior_mu);
    let sigma = sample_uniform(&mut rng, config.prior_sigma);
    let x0 = sample_uniform(&mut rng, config.prior_x0);
    let horizon = sample_uniform(&mut rng, config.horizon_range);
    let n_steps = config.n_steps_choices[rng.random_range(0..config.n_steps_choices.len())];

    let params = OuParams::new(theta, mu, sigma, x0, horizon)?;
    let grid = TimeGrid::for_params(&params, n_steps)?;
    let set = simulate(&params, &grid, 1, derive_seed(config.seed, TAG_SIM, index))?;
    let features = featurize(set.path(0), &grid, config.feature_len)?;
    Ok((features.values, [mu, theta, sigma]))
}

fn generate_dataset(config: &TrainConfig) -> Result<(Matrix, Matrix)> {
    let total = config.n_train + config.n_val;
    let instances: Vec<(Vec<f64>, [f64; N_OUTPUTS])> = (0..total as u64)
        .into_par_iter()
        .map(|i| make_instance(config, i))
        .collect::<Result<_>>()?;
    let width = config.feature_len + 1;
    let mut features = Matrix::zeros(total, width);
    let mut targets = Matrix::zeros(total, N_OUTPUTS);
    for (i, (f, t)) in instances.into_iter().enumerate() {
        features.row_mut(i).copy_from_slice(&f);
        targets.row_mut(i).copy_from_slice(&t);
    }
    Ok((features, targets))
}

fn gather_rows(src: &Matrix, indices: &[usize]) -> Matrix {
    let mut out = Matrix::zeros(indices.len(), src.cols);
    for (r, &i) in indices.iter().enumerate() {
        out.row_mut(r).copy_from_slice(src.row(i));
    }
    out
}

/// Mean squared error of the model on rows [start, end) without building one
/// giant activation matrix.
fn eval_loss(model: &MlpModel, features: &Matrix, targets: &Matrix, range: (usize, usize)) -> f64 {
    let (start, end) = range;
    let mut total = 0.0;
    let mut chunk_start = start;
    while chunk_start < end {
        let chunk_end = (chunk_start + EVAL_CHUNK).min(end);
        let indices: Vec<usize> = (chunk_start..chunk_end).collect();
        let batch = gather_rows(features, &indices);
        let (pred, _) = forward(model, &batch).expect("dataset width matches model");
        for r in 0..pred.rows {
            let want = targets.row(chunk_start + r);
            for (p, t) in pred.row(r).iter().zip(want) {
                let d = p - t;
                total += d * d;
            }
        }
        chunk_start = chunk_end;
    }
    total / ((end - start) * N_OUTPUTS) as f64
}

fn shuffled_indices(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        idx.swap(i, j);
    }
    idx
}

/// Generates the dataset, trains for `config.epochs` epochs of shuffled
/// mini-batches, and returns the model with the lowest validation loss along
/// with the full loss history (epoch 0 is the untrained baseline).
pub fn train(config: &TrainConfig) -> Result<(MlpModel, TrainHistory)> {
    config.validate()?;
    let (features, targets) = generate_dataset(config)?;
    let n_train = config.n_train;
    let total = n_train + config.n_val;
    let val_range = (n_train, total);

    let mut model = glorot_init(&config.layer_dims(), derive_seed(config.seed, TAG_INIT, 0))?;
    let mut history = TrainHistory::default();

    let baseline_train = eval_loss(&model, &features, &targets, (0, n_train));
    let baseline_val = eval_loss(&model, &features, &targets, val_range);
    history.rows.push(HistoryRow {
        epoch: 0,
        train_loss: baseline_train,
        val_loss: baseline_val,
    });

    let mut best = model.clone();
    let mut best_val = baseline_val;

    for epoch in 1..=config.epochs {
        let mut rng =
            ChaCha8Rng::seed_from_u64(derive_seed(config.seed, TAG_SHUFFLE, epoch as u64));
        let order = shuffled_indices(n_train, &mut rng);
        let mut epoch_sq_sum = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let batch = gather_rows(&features, chunk);
            let batch_targets = gather_rows(&targets, chunk);
            let (loss, grads) = loss_and_backward(&model, &batch, &batch_targets)?;
            adam_step(
                &mut model,
                &grads,
                config.learning_rate,
                config.adam_betas,
                config.adam_eps,
            );
            epoch_sq_sum += loss * (chunk.len() * N_OUTPUTS) as f64;
        }
        let train_loss = epoch_sq_sum / (n_train * N_OUTPUTS) as f64;
        let val_loss = eval_loss(&model, &features, &targets, val_range);
        history.rows.push(HistoryRow {
            epoch,
            train_loss,
            val_loss,
        });
        if val_loss < best_val {
            best_val = val_loss;
            best = model.clone();
        }
    }
    Ok((best, history))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> TrainConfig {
        TrainConfig {
            prior_theta: (1.0, 5.0),
            prior_sigma: (0.2, 1.0),
            n_steps_choices: vec![50],
            horizon_range: (1.0, 2.0),
            hidden_dims: vec![8],
            n_train: 24,
            n_val: 8,
            feature_len: 5,
            batch_size: 8,
            epochs: 2,
            seed: 77,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn empty_dataset_is_rejected() {
        let cfg = TrainConfig {
            n_train: 0,
            n_val: 0,
            ..tiny_config()
        };
        assert!(matches!(cfg.validate(), Err(Error::InvalidConfig { .. })));
    }

    #[test]
    fn validation_catches_bad_fields() {
        let base = tiny_config();
        let cases = [
            TrainConfig { prior_theta: (0.0, 1.0), ..base.clone() },
            TrainConfig { prior_sigma: (-0.1, 1.0), ..base.clone() },
            TrainConfig { prior_mu: (2.0, -1.0), ..base.clone() },
            TrainConfig { n_steps_choices: vec![], ..base.clone() },
            TrainConfig { n_steps_choices: vec![3], ..base.clone() },
            TrainConfig { feature_len: 1, ..base.clone() },
            TrainConfig { batch_size: 0, ..base.clone() },
            TrainConfig { epochs: 0, ..base.clone() },
            TrainConfig { learning_rate: 0.0, ..base.clone() },
            TrainConfig { adam_betas: (1.0, 0.999), ..base.clone() },
            TrainConfig { hidden_dims: vec![8, 0], ..base.clone() },
        ];
        for cfg in cases {
            assert!(cfg.validate().is_err(), "accepted invalid config {cfg:?}");
        }
        assert!(base.validate().is_ok());
    }

    #[test]
    fn training_is_bitwise_deterministic() {
        let cfg = tiny_config();
        let (m1, h1) = train(&cfg).unwrap();
        let (m2, h2) = train(&cfg).unwrap();
        assert_eq!(h1, h2);
        assert_eq!(m1.weights, m2.weights);
        assert_eq!(m1.biases, m2.biases);
        assert_eq!(h1.rows.len(), cfg.epochs + 1);
        assert_eq!(h1.rows[0].epoch, 0);
    }

    #[test]
    fn returned_model_attains_the_best_recorded_val_loss() {
        let cfg = TrainConfig {
            epochs: 6,
            ..tiny_config()
        };
        let (model, history) = train(&cfg).unwrap();
        let (features, targets) = generate_dataset(&cfg).unwrap();
        let val = eval_loss(
            &model,
            &features,
            &targets,
            (cfg.n_train, cfg.n_train + cfg.n_val),
        );
        let (_, best) = history.best_val().unwrap();
        assert_eq!(val.to_bits(), best.to_bits());
    }

    #[test]
    fn history_csv_has_header_and_full_precision_rows() {
        let history = TrainHistory {
            rows: vec![
                HistoryRow { epoch: 0, train_loss: 1.5, val_loss: 2.25 },
                HistoryRow { epoch: 1, train_loss: 0.1, val_loss: 0.125 },
            ],
        };
        let csv = history.to_csv_string();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "epoch,train_loss,val_loss");
        assert_eq!(lines[1], "0,1.5,2.25");
        assert_eq!(lines[2], "1,0.1,0.125");
    }

    #[test]
    fn config_hash_tracks_content() {
        let a = tiny_config();
        let b = tiny_config();
        assert_eq!(a.config_hash(), b.config_hash());
        let c = TrainConfig { seed: 78, ..tiny_config() };
        assert_ne!(a.config_hash(), c.config_hash());
        assert_eq!(a.config_hash().len(), 64);
    }

    #[test]
    fn model_learns_mu_when_it_is_the_only_varying_parameter() {
        let cfg = TrainConfig {
            prior_theta: (3.0, 3.0),
            prior_sigma: (0.3, 0.3),
            prior_mu: (-1.0, 2.0),
            prior_x0: (-1.0, 2.0),
            horizon_range: (1.0, 1.0),
            n_steps_choices: vec![200],
            hidden_dims: vec![32],
            n_train: 400,
            n_val: 100,
            feature_len: 20,
            batch_size: 32,
            learning_rate: 5e-3,
            epochs: 60,
            seed: 4242,
            ..TrainConfig::default()
        };
        let (model, _) = train(&cfg).unwrap();
        let (features, targets) = generate_dataset(&cfg).unwrap();

        let val_mu: Vec<f64> = (cfg.n_train..cfg.n_train + cfg.n_val)
            .map(|i| targets.get(i, 0))
            .collect();
        let mean_mu = val_mu.iter().sum::<f64>() / val_mu.len() as f64;
        let var_mu =
            val_mu.iter().map(|m| (m - mean_mu) * (m - mean_mu)).sum::<f64>() / val_mu.len() as f64;

        let indices: Vec<usize> = (cfg.n_train..cfg.n_train + cfg.n_val).collect();
        let batch = gather_rows(&features, &indices);
        let (pred, _) = forward(&model, &batch).unwrap();
        let mse_mu = (0..pred.rows)
            .map(|r| {
                let d = pred.get(r, 0) - val_mu[r];
                d * d
            })
            .sum::<f64>()
            / pred.rows as f64;
        assert!(
            mse_mu < 0.25 * var_mu,
            "mu MSE {mse_mu} not under 25% of prior variance {var_mu}"
        );
    }
}
