// SPDX-License-Identifier: MIT OR Apache-2.0

//! Training: the two-way label objective, Adam, and a deterministic
//! mini-batch loop.
//!
//! ## Objective
//!
//! The model is trained as a prompted classifier: every example is a
//! rendered prompt ending at the position whose next token should be the
//! label, and the loss is cross-entropy over **only the two label-token
//! logits** at that final position. The rest of the vocabulary never enters
//! the objective, which keeps the classifier semantics crisp and the
//! backward pass cheap.
//!
//! ## Determinism
//!
//! Training is bit-reproducible for a given seed **independent of thread
//! count**. Randomness (shuffling) comes from labeled [`RngStream`]s; the
//! only floating-point reduction whose order could vary — summing per-example
//! gradients in a batch — is pinned by splitting every batch into
//! [`TrainConfig::grad_chunks`] fixed contiguous chunks. Chunks may be
//! processed on any number of threads, each accumulating its examples in
//! index order, and the chunk partials are then summed in chunk order on one
//! thread. The schedule changes the timing, never the bits.

pub mod backprop;

use rayon::prelude::*;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::numerics::{softmax_slice, Real, RngStream};
use backprop::{backprop, forward_tape, LossSeed};

/// One training/evaluation example: a tokenized prompt and its binary label.
#[derive(Debug, Clone)]
pub struct TrainItem {
    /// Full prompt token ids, ending at the label-readout position.
    pub tokens: Vec<u32>,
    /// True when the correct label is "positive" (token `B`).
    pub positive: bool,
}

/// Optimizer and loop hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: Real,
    pub beta1: Real,
    pub beta2: Real,
    pub adam_eps: Real,
    /// Global-norm gradient clipping threshold.
    pub grad_clip: Real,
    /// Fixed number of gradient-accumulation chunks per batch (the
    /// determinism knob described in the module docs).
    pub grad_chunks: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 5,
            batch_size: 32,
            lr: 3e-4,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            grad_clip: 1.0,
            grad_chunks: 8,
        }
    }
}

impl TrainConfig {
    /// Check hyperparameter sanity.
    ///
    /// # Errors
    ///
    /// Returns [`Error::Config`] for non-positive counts/rates.
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || self.grad_chunks == 0 {
            return Err(Error::config("epochs, batch_size, grad_chunks must be >= 1"));
        }
        let lr_ok = self.lr > 0.0 && self.lr.is_finite();
        if !lr_ok {
            return Err(Error::config("learning rate must be positive"));
        }
        let clip_ok = self.grad_clip > 0.0;
        if !clip_ok {
            return Err(Error::config("grad_clip must be positive"));
        }
        Ok(())
    }
}

/// Per-epoch summary emitted by the training loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    /// 1-based epoch number.
    pub epoch: usize,
    /// Mean training loss over the epoch's batches.
    pub mean_loss: Real,
    /// Validation accuracy after the epoch (`None` when no validation set).
    pub val_accuracy: Option<Real>,
}

/// Adam with bias correction; state is stored flat in the canonical tensor
/// order so one pass updates everything.
struct Adam {
    m: Vec<Real>,
    v: Vec<Real>,
    t: usize,
}

impl Adam {
    fn new(n_params: usize) -> Self {
        Adam {
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut ModelParams, grads: &ModelParams, cfg: &TrainConfig) {
        self.t += 1;
        let bc1 = 1.0 - cfg.beta1.powi(self.t as i32);
        let bc2 = 1.0 - cfg.beta2.powi(self.t as i32);
        let mut grad_tensors = Vec::new();
        grads.for_each_tensor(|_, m| grad_tensors.push(m));
        let mut offset = 0;
        let mut idx = 0;
        params.for_each_tensor_mut(|_, w| {
            let g = grad_tensors[idx].data();
            idx += 1;
            let w_data = w.data_mut();
            for (i, (wv, gv)) in w_data.iter_mut().zip(g.iter()).enumerate() {
                let s = offset + i;
                self.m[s] = cfg.beta1 * self.m[s] + (1.0 - cfg.beta1) * gv;
                self.v[s] = cfg.beta2 * self.v[s] + (1.0 - cfg.beta2) * gv * gv;
                let m_hat = self.m[s] / bc1;
                let v_hat = self.v[s] / bc2;
                *wv -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.adam_eps);
            }
            offset += w_data.len();
        });
    }
}

/// Sum of a batch chunk's gradients (in example order) plus its loss total.
fn chunk_grads(
    params: &ModelParams,
    items: &[TrainItem],
    idx: &[usize],
) -> Result<(ModelParams, Real)> {
    let mut grads = params.zeros_like();
    let mut loss_sum = 0.0;
    for &i in idx {
        let item = &items[i];
        let tape = forward_tape(params, &item.tokens)?;
        let out = backprop(
            params,
            &tape,
            LossSeed::TwoWayCrossEntropy {
                target_positive: item.positive,
            },
            Some(&mut grads),
            false,
        )?;
        loss_sum += out.scalar;
    }
    Ok((grads, loss_sum))
}

/// Split `batch` into at most `n_chunks` contiguous chunks of near-equal
/// size (first chunks one longer when the division is uneven).
fn chunk_bounds(len: usize, n_chunks: usize) -> Vec<(usize, usize)> {
    let n_chunks = n_chunks.min(len).max(1);
    let base = len / n_chunks;
    let extra = len % n_chunks;
    let mut bounds = Vec::with_capacity(n_chunks);
    let mut start = 0;
    for c in 0..n_chunks {
        let size = base + usize::from(c < extra);
        bounds.push((start, start + size));
        start += size;
    }
    bounds
}

/// Train `params` in place. Returns the per-epoch stats; `on_epoch` fires
/// after each epoch (for CSV logging / progress display).
///
/// Shuffling draws from `rng.split("shuffle-epoch-{e}")`, so the caller's
/// stream is never advanced and runs are reproducible from the root seed.
///
/// # Errors
///
/// Returns [`Error::Config`] for an invalid config or empty training set;
/// propagates forward/backward errors (e.g. overlong prompts).
pub fn train_classifier(
    params: &mut ModelParams,
    train: &[TrainItem],
    val: &[TrainItem],
    cfg: &TrainConfig,
    rng: &RngStream,
    mut on_epoch: impl FnMut(&EpochStats),
) -> Result<Vec<EpochStats>> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::config("training set is empty"));
    }
    let mut adam = Adam::new(params.num_params());
    let mut history = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        let mut order: Vec<usize> = (0..train.len()).collect();
        rng.split(&format!("shuffle-epoch-{epoch}")).shuffle(&mut order);

        let mut loss_total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let bounds = chunk_bounds(batch.len(), cfg.grad_chunks);
            let partials: Vec<(ModelParams, Real)> = bounds
                .par_iter()
                .map(|&(a, b)| chunk_grads(params, train, &batch[a..b]))
                .collect::<Result<_>>()?;

            // Deterministic reduction: chunk partials summed in chunk order.
            let mut iter = partials.into_iter();
            let (mut grads, mut batch_loss) = iter.next().expect("at least one chunk");
            for (g, l) in iter {
                grads.accumulate(&g)?;
                batch_loss += l;
            }

            let inv_b = 1.0 / batch.len() as Real;
            grads.for_each_tensor_mut(|_, m| m.scale(inv_b));
            loss_total += batch_loss * inv_b;

            // Global-norm clipping.
            let mut norm_sq = 0.0;
            grads.for_each_tensor(|_, m| norm_sq += m.frob_norm_sq());
            let norm = norm_sq.sqrt();
            if norm > cfg.grad_clip {
                let s = cfg.grad_clip / norm;
                grads.for_each_tensor_mut(|_, m| m.scale(s));
            }

            adam.step(params, &grads, cfg);
        }

        let n_batches = order.chunks(cfg.batch_size).count();
        let val_accuracy = if val.is_empty() {
            None
        } else {
            Some(evaluate_accuracy(params, val)?)
        };
        let stats = EpochStats {
            epoch,
            mean_loss: loss_total / n_batches as Real,
            val_accuracy,
        };
        on_epoch(&stats);
        history.push(stats);
    }
    Ok(history)
}

/// Model's label decision and confidence for one prompt:
/// `(is_positive, p_positive, logit_difference)`. Ties (exactly equal
/// logits) resolve to positive, deterministically.
///
/// # Errors
///
/// Propagates forward-pass errors.
pub fn predict(params: &ModelParams, tokens: &[u32]) -> Result<(bool, Real, Real)> {
    let tape = forward_tape(params, tokens)?;
    let (z_neg, z_pos) = tape.label_logits(params);
    let p = softmax_slice(&[z_neg, z_pos])?;
    Ok((z_pos >= z_neg, p[1], z_pos - z_neg))
}

/// Fraction of items the model labels correctly. Parallelized over examples;
/// the correct-count sum is an integer, so the result is schedule-independent.
///
/// # Errors
///
/// Returns [`Error::Config`] for an empty set; propagates forward errors.
pub fn evaluate_accuracy(params: &ModelParams, items: &[TrainItem]) -> Result<Real> {
    if items.is_empty() {
        return Err(Error::config("cannot evaluate accuracy on an empty set"));
    }
    let correct: usize = items
        .par_iter()
        .map(|item| {
            let (pos, _, _) = predict(params, &item.tokens)?;
            Ok(usize::from(pos == item.positive))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum();
    Ok(correct as Real / items.len() as Real)
}
