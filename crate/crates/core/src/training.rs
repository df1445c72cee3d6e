//! Losses, optimizers, dropout and the mini-batch training loop.
//!
//! All four architectures train with softmax cross-entropy over the five
//! classes. The optimizer is Adam by default (SGD available); L2 weight
//! decay applies only to the feedforward architectures, which are the ones
//! carrying an alpha hyperparameter. Everything stochastic (init, shuffling,
//! dropout) draws from labeled streams of the configured seed, so a run is
//! bit-for-bit reproducible.

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, NormalizerStats};
use crate::error::{Error, Result};
use crate::math::Matrix;
use crate::models::{init_params, model_backward, ModelSpec, RunMode, TrainedModel};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// L2 coefficient; applied to MLP/ANN parameters only.
    pub l2_alpha: f64,
    pub optimizer: OptimizerKind,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.001,
            epochs: 200,
            batch_size: 32,
            l2_alpha: 0.001,
            optimizer: OptimizerKind::Adam,
            seed: 42,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.learning_rate.is_finite() || self.learning_rate <= 0.0 {
            return Err(Error::Config(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if self.l2_alpha < 0.0 {
            return Err(Error::Config("l2_alpha must be non-negative".into()));
        }
        Ok(())
    }
}

/// Per-epoch loss history of one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainHistory {
    pub train_loss: Vec<f64>,
    pub val_loss: Option<Vec<f64>>,
    pub wall_time_s: f64,
}

impl TrainHistory {
    /// CSV rendering with header `epoch,train_loss,val_loss`; the val column
    /// is empty when no validation set was supplied.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,val_loss\n");
        for (i, loss) in self.train_loss.iter().enumerate() {
            let val = self
                .val_loss
                .as_ref()
                .map(|v| format!("{}", v[i]))
                .unwrap_or_default();
            out.push_str(&format!("{},{},{}\n", i + 1, loss, val));
        }
        out
    }
}

/// Probability floor applied before the log so the loss stays finite.
pub const PROB_FLOOR: f64 = 1e-12;

/// Cross-entropy of one prediction: -log(probs[label]). Probabilities are
/// floored at [`PROB_FLOOR`] so the loss stays finite; non-finite inputs are
/// rejected rather than silently clamped.
pub fn cross_entropy(probs: &[f64], label: usize) -> Result<f64> {
    if label >= probs.len() {
        return Err(Error::Domain(format!(
            "label {label} out of range for {} classes",
            probs.len()
        )));
    }
    let p = probs[label];
    if !p.is_finite() {
        return Err(Error::NonFinite("predicted probability".into()));
    }
    Ok(-p.max(PROB_FLOOR).ln())
}

/// Mean squared error.
pub fn mse(pred: &[f64], target: &[f64]) -> Result<f64> {
    if pred.len() != target.len() || pred.is_empty() {
        return Err(Error::Dimension(format!(
            "mse: {} predictions vs {} targets",
            pred.len(),
            target.len()
        )));
    }
    let sum: f64 = pred
        .iter()
        .zip(target)
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    Ok(sum / pred.len() as f64)
}

/// One SGD step: theta <- theta - lr * (g + alpha * theta).
pub fn sgd_step(params: &mut [f64], grads: &[f64], lr: f64, alpha: f64) -> Result<()> {
    if params.len() != grads.len() {
        return Err(Error::Dimension(format!(
            "sgd_step: {} params vs {} grads",
            params.len(),
            grads.len()
        )));
    }
    for (p, g) in params.iter_mut().zip(grads) {
        *p -= lr * (g + alpha * *p);
    }
    Ok(())
}

/// First/second moment accumulators for Adam.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(param_len: usize) -> Self {
        AdamState {
            m: vec![0.0; param_len],
            v: vec![0.0; param_len],
            t: 0,
        }
    }
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Bias-corrected Adam update.
pub fn adam_step(
    state: &mut AdamState,
    params: &mut [f64],
    grads: &[f64],
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
) -> Result<()> {
    if params.len() != grads.len() || state.m.len() != params.len() {
        return Err(Error::Dimension(format!(
            "adam_step: {} params, {} grads, {} moments",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    state.t += 1;
    let t = state.t as f64;
    let bc1 = 1.0 - beta1.powf(t);
    let bc2 = 1.0 - beta2.powf(t);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * g;
        state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * g * g;
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + eps);
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropoutMode {
    Train,
    Eval,
}

/// Inverted dropout: in training, zero each element with probability `rate`
/// and scale the survivors by 1/(1-rate); evaluation is the identity.
pub fn dropout_apply(m: &Matrix, rate: f64, mode: DropoutMode, rng: &mut Rng) -> Result<Matrix> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::Domain(format!(
            "dropout rate must be in [0,1), got {rate}"
        )));
    }
    if mode == DropoutMode::Eval || rate == 0.0 {
        return Ok(m.clone());
    }
    let scale = 1.0 / (1.0 - rate);
    let mut out = m.clone();
    for v in out.data_mut().iter_mut() {
        if rng.next_f64() < rate {
            *v = 0.0;
        } else {
            *v *= scale;
        }
    }
    Ok(out)
}

/// Trains `spec` on `train_set`, normalizing with statistics fitted on the
/// training rows only. Deterministic given the config seed. Fails with a
/// divergence error (naming the 1-based epoch) if the loss leaves the finite
/// range.
pub fn train(
    spec: &ModelSpec,
    train_set: &Dataset,
    val_set: Option<&Dataset>,
    config: &TrainConfig,
) -> Result<(TrainedModel, TrainHistory)> {
    config.validate()?;
    spec.validate()?;
    if train_set.is_empty() {
        return Err(Error::EmptyInput("training set is empty".into()));
    }

    #[cfg(not(target_arch = "wasm32"))]
    let started = std::time::Instant::now();

    let normalizer = NormalizerStats::fit(&train_set.feature_matrix())?;
    let x_train = normalized_rows(&normalizer, train_set)?;
    let y_train = &train_set.labels;
    let x_val = match val_set {
        Some(ds) => Some((normalized_rows(&normalizer, ds)?, ds.labels.clone())),
        None => None,
    };

    let mut init_rng = Rng::labeled(config.seed, "init");
    let params = init_params(spec, &mut init_rng)?;
    let mut model = TrainedModel {
        spec: spec.clone(),
        params,
        normalizer,
    };

    let alpha = if spec.uses_l2() { config.l2_alpha } else { 0.0 };
    let mut shuffle_rng = Rng::labeled(config.seed, "shuffle");
    let mut dropout_rng = Rng::labeled(config.seed, "dropout");
    let flat_len = model.params.param_count();
    let mut adam = AdamState::new(flat_len);

    let mut train_loss = Vec::with_capacity(config.epochs);
    let mut val_loss = val_set.map(|_| Vec::with_capacity(config.epochs));
    let mut indices: Vec<usize> = (0..train_set.len()).collect();

    for epoch in 0..config.epochs {
        shuffle_rng.shuffle(&mut indices);
        let mut epoch_loss_sum = 0.0;
        for batch in indices.chunks(config.batch_size) {
            let mut grad_accum = model.params.zeros_like();
            let mut batch_loss = 0.0;
            for &idx in batch {
                let (probs, trace) = model.forward(
                    &x_train[idx],
                    RunMode::Train {
                        dropout_rng: &mut dropout_rng,
                    },
                )?;
                batch_loss += match cross_entropy(&probs, y_train[idx]) {
                    Err(Error::NonFinite(_)) => return Err(Error::Divergence { epoch: epoch + 1 }),
                    other => other?,
                };
                let mut dlogits = probs;
                dlogits[y_train[idx]] -= 1.0;
                let grads = model_backward(&model.params, &trace, &dlogits)?;
                grad_accum.add_scaled(&grads, 1.0)?;
            }
            let inv = 1.0 / batch.len() as f64;
            batch_loss *= inv;
            if !batch_loss.is_finite() {
                return Err(Error::Divergence { epoch: epoch + 1 });
            }
            epoch_loss_sum += batch_loss * batch.len() as f64;
            grad_accum.scale(inv);

            let mut pvec = model.params.flatten();
            let mut gvec = grad_accum.flatten();
            if alpha > 0.0 {
                for (g, p) in gvec.iter_mut().zip(&pvec) {
                    *g += alpha * p;
                }
            }
            match config.optimizer {
                OptimizerKind::Sgd => sgd_step(&mut pvec, &gvec, config.learning_rate, 0.0)?,
                OptimizerKind::Adam => adam_step(
                    &mut adam,
                    &mut pvec,
                    &gvec,
                    config.learning_rate,
                    ADAM_BETA1,
                    ADAM_BETA2,
                    ADAM_EPS,
                )?,
            }
            model.params.unflatten_from(&pvec)?;
        }
        let epoch_loss = epoch_loss_sum / train_set.len() as f64;
        if !epoch_loss.is_finite() {
            return Err(Error::Divergence { epoch: epoch + 1 });
        }
        train_loss.push(epoch_loss);

        if let (Some(vl), Some((xs, ys))) = (val_loss.as_mut(), x_val.as_ref()) {
            let mut sum = 0.0;
            for (x, &y) in xs.iter().zip(ys) {
                let (probs, _) = model.forward(x, RunMode::Eval)?;
                sum += match cross_entropy(&probs, y) {
                    Err(Error::NonFinite(_)) => return Err(Error::Divergence { epoch: epoch + 1 }),
                    other => other?,
                };
            }
            vl.push(sum / xs.len() as f64);
        }
    }

    #[cfg(not(target_arch = "wasm32"))]
    let wall_time_s = started.elapsed().as_secs_f64();
    #[cfg(target_arch = "wasm32")]
    let wall_time_s = 0.0;

    let history = TrainHistory {
        train_loss,
        val_loss,
        wall_time_s,
    };
    Ok((model, history))
}

fn normalized_rows(stats: &NormalizerStats, ds: &Dataset) -> Result<Vec<Vec<f64>>> {
    ds.samples
        .iter()
        .map(|s| stats.apply_row(&s.as_array()))
        .collect()
}
