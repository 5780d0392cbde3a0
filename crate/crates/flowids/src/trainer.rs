//! Mini-batch training: categorical cross-entropy on softmax outputs, Adam
//! updates over the flat parameter registry, and per-epoch history for the
//! accuracy/loss curves.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;

use crate::datapipe::Dataset;
use crate::error::{Error, Result};
use crate::model::{argmax_row, backward, forward, Model};
use crate::rng::{self, streams};
use crate::tensor::{Matrix2, Matrix3};

/// Training hyperparameters. Only the optimizer family, the loss, and the
/// 50-epoch budget are fixed by the experiment setup; the rest are the
/// conventional defaults.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps_adam: f64,
    pub seed: u64,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 50,
            batch_size: 128,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps_adam: 1e-8,
            seed: 0,
            shuffle: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be >= 1".to_string()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".to_string()));
        }
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return Err(Error::Config("learning_rate must be >= 0".to_string()));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0 < b && b < 1.0) {
                return Err(Error::Config(format!("{name} must be in (0, 1)")));
            }
        }
        Ok(())
    }
}

/// Floor inside the cross-entropy logarithm, guarding underflown
/// probabilities. Applied as a clamp (`ln(max(p, eps))`) so healthy
/// probabilities are logged exactly.
pub const EPS_LOG: f64 = 1e-12;

/// Mean negative log-likelihood and the fused softmax/cross-entropy gradient
/// `(probs - onehot) / batch` with respect to the logits.
pub fn cross_entropy(probs: &Matrix2, labels: &[usize]) -> Result<(f64, Matrix2)> {
    if probs.rows() != labels.len() {
        return Err(Error::shape(
            "cross_entropy",
            format!("{} prob rows vs {} labels", probs.rows(), labels.len()),
        ));
    }
    let classes = probs.cols();
    if let Some(&bad) = labels.iter().find(|&&y| y >= classes) {
        return Err(Error::Data(format!(
            "cross_entropy: label {bad} out of range for {classes} classes"
        )));
    }
    let batch = labels.len() as f64;
    let mut loss = 0.0;
    let mut dlogits = probs.clone();
    for (r, &y) in labels.iter().enumerate() {
        loss -= probs.get(r, y).max(EPS_LOG).ln();
        let row = dlogits.row_mut(r);
        row[y] -= 1.0;
        for v in row.iter_mut() {
            *v /= batch;
        }
    }
    Ok((loss / batch, dlogits))
}

/// First/second moment accumulators over the flat parameter vector.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl AdamState {
    pub fn new(param_count: usize) -> Self {
        AdamState {
            m: vec![0.0; param_count],
            v: vec![0.0; param_count],
            t: 0,
        }
    }

    pub fn timestep(&self) -> u64 {
        self.t
    }
}

/// One bias-corrected Adam update:
/// `m <- b1*m + (1-b1)*g`, `v <- b2*v + (1-b2)*g^2`,
/// `theta <- theta - lr * mhat / (sqrt(vhat) + eps)`.
pub fn adam_step(
    state: &mut AdamState,
    params: &mut [f64],
    grads: &[f64],
    cfg: &TrainConfig,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::shape(
            "adam_step",
            format!(
                "{} params, {} grads, {} state entries",
                params.len(),
                grads.len(),
                state.m.len()
            ),
        ));
    }
    state.t += 1;
    let bias1 = 1.0 - cfg.beta1.powi(state.t as i32);
    let bias2 = 1.0 - cfg.beta2.powi(state.t as i32);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
        let m_hat = state.m[i] / bias1;
        let v_hat = state.v[i] / bias2;
        params[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.eps_adam);
    }
    Ok(())
}

/// Loss/accuracy per epoch, on both splits.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
}

impl TrainHistory {
    /// CSV rows `epoch,train_loss,train_acc,val_loss,val_acc`, 1-based epochs.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,train_acc,val_loss,val_acc\n");
        for (i, e) in self.epochs.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                i + 1,
                e.train_loss,
                e.train_accuracy,
                e.val_loss,
                e.val_accuracy
            ));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv())?;
        Ok(())
    }
}

/// Gather the given dataset rows into a `(batch x features x 1)` input and
/// the matching labels.
pub fn gather_batch(ds: &Dataset, rows: &[usize]) -> (Matrix3, Vec<usize>) {
    let d = ds.features.cols();
    let mut data = Vec::with_capacity(rows.len() * d);
    let mut labels = Vec::with_capacity(rows.len());
    for &r in rows {
        data.extend(ds.features.row(r));
        labels.push(ds.labels[r]);
    }
    let x = Matrix3::from_vec(rows.len(), d, 1, data).expect("shape by construction");
    (x, labels)
}

/// Mean loss and accuracy of the model over a dataset, evaluated in batches
/// (each batch weighted by its size).
pub fn evaluate(model: &Model, ds: &Dataset, batch_size: usize) -> Result<(f64, f64)> {
    if ds.is_empty() {
        return Err(Error::Data("evaluate: empty dataset".to_string()));
    }
    let rows: Vec<usize> = (0..ds.len()).collect();
    let mut total_loss = 0.0;
    let mut correct = 0usize;
    for chunk in rows.chunks(batch_size.max(1)) {
        let (x, labels) = gather_batch(ds, chunk);
        let (probs, _) = forward(model, &x)?;
        let (loss, _) = cross_entropy(&probs, &labels)?;
        total_loss += loss * chunk.len() as f64;
        for (r, &y) in labels.iter().enumerate() {
            if argmax_row(probs.row(r)) == y {
                correct += 1;
            }
        }
    }
    Ok((
        total_loss / ds.len() as f64,
        correct as f64 / ds.len() as f64,
    ))
}

/// Train for `cfg.epochs` epochs of shuffled mini-batches (the trailing short
/// batch is kept), evaluating both splits after each epoch. Deterministic for
/// fixed (model, data, seed).
pub fn train(
    model: &mut Model,
    train_ds: &Dataset,
    val_ds: &Dataset,
    cfg: &TrainConfig,
) -> Result<TrainHistory> {
    cfg.validate()?;
    train_ds.validate()?;
    val_ds.validate()?;
    if train_ds.is_empty() || val_ds.is_empty() {
        return Err(Error::Data("train: empty dataset".to_string()));
    }
    if train_ds.n_features() != model.spec.steps {
        return Err(Error::shape(
            "train",
            format!(
                "dataset has {} features but the model expects {} steps",
                train_ds.n_features(),
                model.spec.steps
            ),
        ));
    }

    let mut shuffle_rng = rng::seeded_stream(cfg.seed, streams::TRAIN_SHUFFLE);
    let mut adam = AdamState::new(model.count_params());
    let mut history = TrainHistory::default();
    let mut order: Vec<usize> = (0..train_ds.len()).collect();

    for _epoch in 0..cfg.epochs {
        if cfg.shuffle {
            order.shuffle(&mut shuffle_rng);
        }
        for chunk in order.chunks(cfg.batch_size) {
            let (x, labels) = gather_batch(train_ds, chunk);
            let (probs, cache) = forward(model, &x)?;
            let (_, dlogits) = cross_entropy(&probs, &labels)?;
            let grads = backward(model, &cache, &dlogits)?;
            let mut flat = model.flatten_params();
            adam_step(&mut adam, &mut flat, &grads.flatten(), cfg)?;
            model.assign_params(&flat)?;
        }

        let (train_loss, train_accuracy) = evaluate(model, train_ds, cfg.batch_size)?;
        let (val_loss, val_accuracy) = evaluate(model, val_ds, cfg.batch_size)?;
        history.epochs.push(EpochRecord {
            train_loss,
            train_accuracy,
            val_loss,
            val_accuracy,
        });
    }
    Ok(history)
}
