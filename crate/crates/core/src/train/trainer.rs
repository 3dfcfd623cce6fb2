use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::adam::{AdamConfig, AdamState};
use super::metrics::Metrics;
use crate::data::Dialog;
use crate::error::{Error, Result};
use crate::seqmodel::{DialogLoss, Model};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    /// Dialogs per optimiser step.
    pub batch_size: usize,
    pub epochs: usize,
    pub l2: f64,
    pub dropout_p: f64,
    pub seed: u64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    /// Stop after this many epochs without held-out UA improvement (needs validation data).
    pub patience: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 1e-4,
            batch_size: 20,
            epochs: 200,
            l2: 1e-5,
            dropout_p: 0.2,
            seed: 0,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            patience: Some(20),
        }
    }
}

impl TrainConfig {
    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            eps: self.adam_eps,
            l2: self.l2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.lr.is_finite() || self.lr < 0.0 {
            return Err(Error::Config(format!("learning rate must be >= 0, got {}", self.lr)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(Error::Config(format!("dropout p must be in [0, 1), got {}", self.dropout_p)));
        }
        if self.l2.is_nan() || self.l2 < 0.0 {
            return Err(Error::Config(format!("l2 coefficient must be >= 0, got {}", self.l2)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_ua: f64,
    pub val_ua: Option<f64>,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Model,
    pub log: Vec<EpochLog>,
    /// Epoch whose parameters were kept (the last one without validation data).
    pub best_epoch: usize,
    /// Rows that hit the log-probability clamp during training.
    pub clamped: usize,
}

/// SplitMix64 finaliser over a sequence of words.
pub(crate) fn mix_seed(words: &[u64]) -> u64 {
    let mut z = 0x9E37_79B9_7F4A_7C15u64;
    for &w in words {
        z = z.wrapping_add(w).wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
    }
    z
}

/// Metrics of `model` on `dialogs` in inference mode (no dropout).
pub fn evaluate(model: &Model, dialogs: &[Dialog]) -> Result<Metrics> {
    let per_dialog: Vec<(Vec<usize>, Vec<usize>)> = dialogs
        .par_iter()
        .map(|d| Ok((model.predict(d)?.labels(), d.labels())))
        .collect::<Result<_>>()?;
    let (pred, truth): (Vec<usize>, Vec<usize>) = per_dialog
        .into_iter()
        .flat_map(|(p, t)| p.into_iter().zip(t))
        .unzip();
    Metrics::from_predictions(&pred, &truth, model.config().classes)
}

/// Loss and summed gradients of one batch. Dialog gradients are computed
/// independently and added in batch order, so the result does not depend on
/// the number of worker threads.
pub fn batch_gradient(model: &Model, batch: &[&Dialog], dropout_seed: Option<u64>) -> Result<DialogLoss> {
    let denom: usize = batch.iter().map(|d| d.len()).sum();
    let parts: Vec<DialogLoss> = batch
        .par_iter()
        .enumerate()
        .map(|(i, d)| {
            let mut rng = dropout_seed.map(|s| ChaCha8Rng::seed_from_u64(mix_seed(&[s, i as u64])));
            model.loss_and_grad(d, denom as f64, rng.as_mut().map(|r| r as &mut dyn rand::RngCore))
        })
        .collect::<Result<_>>()?;
    let mut total = DialogLoss {
        loss: 0.0,
        grads: model.zero_grads(),
        clamped: 0,
    };
    for p in parts {
        total.loss += p.loss;
        total.grads.merge(&p.grads)?;
        total.clamped += p.clamped;
    }
    Ok(total)
}

/// Trains `model` with Adam on dialog-level minibatches shuffled every epoch.
///
/// `cfg.dropout_p` replaces the model's dropout rate. With `val` and
/// `cfg.patience`, training stops early and the parameters of the best
/// held-out epoch are returned.
pub fn train(mut model: Model, dialogs: &[Dialog], val: Option<&[Dialog]>, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if dialogs.is_empty() {
        return Err(Error::Config("training set is empty".into()));
    }
    model.set_dropout(cfg.dropout_p)?;
    let adam_cfg = cfg.adam();
    let mut adam = AdamState::new(model.param_matrices());
    let mut order: Vec<usize> = (0..dialogs.len()).collect();
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(mix_seed(&[cfg.seed, 0x5348_5546]));
    let total_utts: usize = dialogs.iter().map(Dialog::len).sum();

    let mut log = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize, Model)> = None;
    let mut clamped = 0;
    let start = Instant::now();

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut weighted_loss = 0.0;
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<&Dialog> = chunk.iter().map(|&i| &dialogs[i]).collect();
            let seed = mix_seed(&[cfg.seed, epoch as u64, b as u64]);
            let out = batch_gradient(&model, &batch, Some(seed))?;
            if !out.loss.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    batch: b,
                    loss: out.loss,
                });
            }
            clamped += out.clamped;
            let utts: usize = batch.iter().map(|d| d.len()).sum();
            weighted_loss += out.loss * utts as f64;
            adam.step_params(model.params_mut(), out.grads.as_slice(), &adam_cfg)?;
        }

        let train_ua = evaluate(&model, dialogs)?.unweighted_accuracy;
        let val_ua = val.map(|v| evaluate(&model, v)).transpose()?.map(|m| m.unweighted_accuracy);
        log.push(EpochLog {
            epoch,
            train_loss: weighted_loss / total_utts as f64,
            train_ua,
            val_ua,
            seconds: start.elapsed().as_secs_f64(),
        });

        if let Some(ua) = val_ua {
            if best.as_ref().is_none_or(|(b, _, _)| ua > *b) {
                best = Some((ua, epoch, model.clone()));
            }
            let best_epoch = best.as_ref().map_or(epoch, |(_, e, _)| *e);
            if cfg.patience.is_some_and(|p| epoch - best_epoch >= p) {
                break;
            }
        }
    }

    let (model, best_epoch) = match best {
        Some((_, e, m)) if cfg.patience.is_some() => (m, e),
        _ => (model, log.len()),
    };
    Ok(TrainOutcome {
        model,
        log,
        best_epoch,
        clamped,
    })
}
