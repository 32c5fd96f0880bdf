//! Softmax cross-entropy training with SGD plus momentum and a step-decay
//! learning-rate schedule.
//!
//! Training minimizes classification loss; the pruning objective elsewhere in
//! the crate is squared output reconstruction and is kept strictly separate.

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::mlp::TwoLayerNet;
use crate::mnist::{BatchSampler, Dataset};

/// SGD hyperparameters. `milestones` are fractions of the total epochs at
/// which the learning rate is multiplied by `lr_decay`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr_decay: f64,
    pub milestones: Vec<f64>,
    pub weight_decay: f64,
    pub seed: u64,
}

impl TrainConfig {
    /// The digit-classification protocol: batch 128, lr 1e-3, momentum 0.9,
    /// no weight decay, 10x decay after 50% and 75% of epochs.
    pub fn mnist_protocol(epochs: usize, seed: u64) -> Self {
        TrainConfig {
            lr: 1e-3,
            momentum: 0.9,
            epochs,
            batch_size: 128,
            lr_decay: 0.1,
            milestones: vec![0.5, 0.75],
            weight_decay: 0.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::InvalidParameter(format!("bad lr {}", self.lr)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidParameter(format!(
                "momentum {} outside [0, 1)",
                self.momentum
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidParameter("batch_size must be positive".into()));
        }
        if self.weight_decay < 0.0 {
            return Err(Error::InvalidParameter("negative weight_decay".into()));
        }
        let increasing = self
            .milestones
            .windows(2)
            .all(|w| w[0] < w[1]);
        let in_range = self.milestones.iter().all(|&m| 0.0 < m && m < 1.0);
        if !increasing || !in_range {
            return Err(Error::InvalidParameter(
                "milestones must be strictly increasing inside (0, 1)".into(),
            ));
        }
        Ok(())
    }

    /// Learning rate in force during `epoch` (0-based).
    fn lr_at_epoch(&self, epoch: usize) -> f64 {
        let passed = self
            .milestones
            .iter()
            .filter(|&&m| epoch >= (m * self.epochs as f64).floor() as usize)
            .count();
        self.lr * self.lr_decay.powi(passed as i32)
    }
}

/// Per-weight gradients of the mean cross-entropy over a batch.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub w0: DenseMatrix,
    pub w1: DenseMatrix,
}

/// Column-wise softmax with the usual max-shift for stability.
fn softmax_columns(logits: &DenseMatrix) -> DenseMatrix {
    let mut out = logits.clone();
    let rows = out.rows();
    for c in 0..out.cols() {
        let col = out.column_mut(c);
        let max = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in col.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in col.iter_mut() {
            *v /= sum;
        }
        debug_assert_eq!(col.len(), rows);
    }
    out
}

/// Mean softmax cross-entropy of `logits` (one column per example).
pub fn softmax_cross_entropy(logits: &DenseMatrix, labels: &[u8]) -> f64 {
    debug_assert_eq!(logits.cols(), labels.len());
    let mut total = 0.0;
    for (c, &label) in labels.iter().enumerate() {
        let col = logits.column(c);
        let max = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let log_sum: f64 = col.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        total += max + log_sum - col[usize::from(label)];
    }
    total / labels.len() as f64
}

/// Gradients of the mean cross-entropy for one batch, with the batch loss.
pub fn backprop_gradients(
    net: &TwoLayerNet,
    x: &DenseMatrix,
    labels: &[u8],
) -> Result<(Gradients, f64)> {
    if x.cols() != labels.len() {
        return Err(Error::CountMismatch {
            images: x.cols(),
            labels: labels.len(),
        });
    }
    let b = labels.len() as f64;
    let pre = net.w0().matmul(x)?;
    let hidden = pre.map(|v| v.max(0.0));
    let logits = net.w1().matmul(&hidden)?;
    let loss = softmax_cross_entropy(&logits, labels);

    // d loss / d logits = (softmax - onehot) / batch
    let mut d_logits = softmax_columns(&logits);
    for (c, &label) in labels.iter().enumerate() {
        let col = d_logits.column_mut(c);
        col[usize::from(label)] -= 1.0;
        for v in col.iter_mut() {
            *v /= b;
        }
    }

    let g_w1 = d_logits.matmul_transposed_rhs(&hidden)?;
    let mut d_hidden = net.w1().matmul_transposed_self(&d_logits)?;
    // ReLU gate on the pre-activations
    for c in 0..d_hidden.cols() {
        let gate = pre.column(c).to_vec();
        let col = d_hidden.column_mut(c);
        for (v, a) in col.iter_mut().zip(gate) {
            if a <= 0.0 {
                *v = 0.0;
            }
        }
    }
    let g_w0 = d_hidden.matmul_transposed_rhs(x)?;
    Ok((Gradients { w0: g_w0, w1: g_w1 }, loss))
}

fn apply_update(
    weight: &DenseMatrix,
    velocity: &mut DenseMatrix,
    grad: &DenseMatrix,
    lr: f64,
    momentum: f64,
    weight_decay: f64,
) -> DenseMatrix {
    let mut next = weight.clone();
    let n = weight.rows() * weight.cols();
    for idx in 0..n {
        let (r, c) = (idx % weight.rows(), idx / weight.rows());
        let g = grad.get(r, c) + weight_decay * weight.get(r, c);
        let v = momentum * velocity.get(r, c) + g;
        velocity.set(r, c, v);
        next.set(r, c, weight.get(r, c) - lr * v);
    }
    next
}

/// Train with SGD + momentum, returning the final network and the per-epoch
/// mean training loss. Deterministic for a fixed seed; a non-finite loss
/// aborts with [`Error::TrainingDiverged`] instead of propagating NaN.
pub fn sgd_train(
    net: &TwoLayerNet,
    data: &Dataset,
    cfg: &TrainConfig,
) -> Result<(TwoLayerNet, Vec<f64>)> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::InvalidParameter("dataset is empty".into()));
    }
    let mut current = net.clone();
    let mut vel0 = DenseMatrix::zeros(net.w0().rows(), net.w0().cols());
    let mut vel1 = DenseMatrix::zeros(net.w1().rows(), net.w1().cols());
    let mut sampler = BatchSampler::new(data, cfg.batch_size, cfg.seed)?;
    let mut curve = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let lr = cfg.lr_at_epoch(epoch);
        let mut epoch_loss = 0.0;
        let batches = sampler.batches_per_epoch();
        for _ in 0..batches {
            let (x, labels) = sampler.next_batch();
            let (grads, loss) = backprop_gradients(&current, &x, &labels)?;
            if !loss.is_finite() {
                return Err(Error::TrainingDiverged { epoch });
            }
            epoch_loss += loss;
            let w0 = apply_update(
                current.w0(),
                &mut vel0,
                &grads.w0,
                lr,
                cfg.momentum,
                cfg.weight_decay,
            );
            let w1 = apply_update(
                current.w1(),
                &mut vel1,
                &grads.w1,
                lr,
                cfg.momentum,
                cfg.weight_decay,
            );
            current = TwoLayerNet::new(w0, w1)?;
        }
        curve.push(epoch_loss / batches as f64);
    }
    Ok((current, curve))
}

/// Post-pruning training of the compacted sub-network; identical protocol.
pub fn fine_tune(
    net: &TwoLayerNet,
    data: &Dataset,
    cfg: &TrainConfig,
) -> Result<(TwoLayerNet, Vec<f64>)> {
    sgd_train(net, data, cfg)
}

/// Classification accuracy as a fraction; argmax ties go to the lowest class.
pub fn accuracy(net: &TwoLayerNet, data: &Dataset) -> Result<f64> {
    let out = net.forward(data.features())?;
    let mut correct = 0usize;
    for (c, &label) in data.labels().iter().enumerate() {
        let col = out.column(c);
        let mut best = 0;
        for i in 1..col.len() {
            if col[i] > col[best] {
                best = i;
            }
        }
        if best == usize::from(label) {
            correct += 1;
        }
    }
    Ok(correct as f64 / data.len() as f64)
}
