use rayon::prelude::*;

use super::forward::{bind, forward, patchify};
use super::{evaluate, ModelConfig, ModelError, ModelParams, Result};
use crate::autodiff::Graph;
use crate::rng::XorShift64Star;
use crate::timefreq::Image;

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledImage {
    pub image: Image,
    pub label: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch: usize,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            lr: 1e-3,
            batch: 16,
            seed: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    /// Mean cross-entropy of the samples seen this epoch, each measured
    /// before the update it contributed to.
    pub train_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Weights after the epoch with the highest validation accuracy (the
    /// earliest such epoch on ties), or the initial weights for 0 epochs.
    pub params: ModelParams,
    pub history: Vec<EpochRecord>,
    pub best_epoch: Option<usize>,
    /// Mean cross-entropy over the training set at the initial weights.
    pub initial_train_loss: f64,
}

/// Cross-entropy and its gradient for one sample, flattened in
/// serialization order.
pub fn sample_gradient(params: &ModelParams, config: &ModelConfig, sample: &LabeledImage) -> Result<(f64, Vec<f64>)> {
    if sample.label >= config.num_classes {
        return Err(ModelError::LabelOutOfRange {
            label: sample.label,
            classes: config.num_classes,
        });
    }
    let mut g = Graph::new();
    let w = bind(&mut g, params, true);
    let x = g.constant(patchify(&sample.image, config)?);
    let trace = forward(&mut g, &w, config, x)?;
    let loss = g.cross_entropy(trace.logits, sample.label)?;
    g.backward(loss)?;
    let mut grad = Vec::with_capacity(params.parameter_count());
    for &v in w.tensors() {
        grad.extend_from_slice(g.grad_or_zeros(v).data());
    }
    Ok((g.value(loss).item(), grad))
}

/// Mean cross-entropy over `samples`.
pub fn mean_loss(params: &ModelParams, config: &ModelConfig, samples: &[LabeledImage]) -> Result<f64> {
    if samples.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    let losses = samples
        .par_iter()
        .map(|s| {
            let mut g = Graph::new();
            let w = bind(&mut g, params, false);
            let x = g.constant(patchify(&s.image, config)?);
            let trace = forward(&mut g, &w, config, x)?;
            let loss = g.cross_entropy(trace.logits, s.label)?;
            Ok(g.value(loss).item())
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(losses.iter().sum::<f64>() / samples.len() as f64)
}

/// Adam state over the flattened parameter vector.
struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    step: i32,
}

impl Adam {
    fn new(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            step: 0,
        }
    }

    fn update(&mut self, params: &mut ModelParams, grad: &[f64], tc: &TrainConfig) {
        self.step += 1;
        let c1 = 1.0 - tc.beta1.powi(self.step);
        let c2 = 1.0 - tc.beta2.powi(self.step);
        let mut i = 0;
        for t in params.tensors_mut() {
            for p in t.data_mut() {
                let g = grad[i];
                self.m[i] = tc.beta1 * self.m[i] + (1.0 - tc.beta1) * g;
                self.v[i] = tc.beta2 * self.v[i] + (1.0 - tc.beta2) * g * g;
                let m_hat = self.m[i] / c1;
                let v_hat = self.v[i] / c2;
                *p -= tc.lr * m_hat / (v_hat.sqrt() + tc.eps);
                i += 1;
            }
        }
    }
}

/// Mini-batch Adam on mean cross-entropy.
///
/// Per-sample gradients of a batch are computed in parallel and summed in
/// batch order, so results do not depend on the thread count. LISTA
/// thresholds are clamped to `≥ 0` after every step.
pub fn train_classifier(
    train: &[LabeledImage],
    val: &[LabeledImage],
    config: &ModelConfig,
    init: ModelParams,
    tc: &TrainConfig,
) -> Result<TrainOutcome> {
    if train.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    init.check_config(config)?;
    let initial_train_loss = mean_loss(&init, config, train)?;
    let mut params = init.clone();
    let mut best = (init, None, f64::NEG_INFINITY);
    let mut adam = Adam::new(params.parameter_count());
    let mut rng = XorShift64Star::new(tc.seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let batch = tc.batch.max(1);
    let mut history = Vec::with_capacity(tc.epochs);

    for epoch in 1..=tc.epochs {
        rng.shuffle(&mut order);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(batch) {
            let results = chunk
                .par_iter()
                .map(|&i| sample_gradient(&params, config, &train[i]))
                .collect::<Result<Vec<_>>>()?;
            let mut grad = vec![0.0; adam.m.len()];
            for (loss, g) in &results {
                loss_sum += loss;
                for (acc, v) in grad.iter_mut().zip(g) {
                    *acc += v;
                }
            }
            let inv = 1.0 / chunk.len() as f64;
            grad.iter_mut().for_each(|g| *g *= inv);
            adam.update(&mut params, &grad, tc);
            params.clamp_thresholds();
        }
        let val_accuracy = if val.is_empty() {
            0.0
        } else {
            evaluate(&params, config, val)?.accuracy
        };
        history.push(EpochRecord {
            epoch,
            train_loss: loss_sum / train.len() as f64,
            val_accuracy,
        });
        if val_accuracy > best.2 {
            best = (params.clone(), Some(epoch), val_accuracy);
        }
    }
    Ok(TrainOutcome {
        params: best.0,
        history,
        best_epoch: best.1,
        initial_train_loss,
    })
}
