use std::fmt::Write as _;
use std::time::{Duration, Instant};

use ndarray::ArrayView2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{adam_step, cross_entropy, AdamConfig, AdamState, ModelVariant};
use crate::dataset::LabeledSet;
use crate::error::{Error, Result};

/// Optimization protocol. Defaults: Adam (lr 1e-3, betas 0.9/0.999, eps 1e-8), 50 epochs,
/// batches of 128, early-stopping patience 40, three runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub patience: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Seeds the mini-batch shuffling.
    pub seed: u64,
    pub num_runs: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let adam = AdamConfig::default();
        TrainConfig {
            epochs: 50,
            batch_size: 128,
            patience: 40,
            learning_rate: adam.learning_rate,
            beta1: adam.beta1,
            beta2: adam.beta2,
            epsilon: adam.epsilon,
            seed: 0,
            num_runs: 3,
        }
    }
}

impl TrainConfig {
    pub fn adam(&self) -> AdamConfig {
        AdamConfig { learning_rate: self.learning_rate, beta1: self.beta1, beta2: self.beta2, epsilon: self.epsilon }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || self.num_runs == 0 {
            return Err(Error::config("epochs, batch_size and num_runs must be positive"));
        }
        if self.patience > self.epochs {
            return Err(Error::config(format!("patience {} exceeds epochs {}", self.patience, self.epochs)));
        }
        if !(self.learning_rate > 0.0 && self.epsilon > 0.0) {
            return Err(Error::config("learning rate and epsilon must be positive"));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::config("Adam betas must lie in [0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_acc: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    /// Index into `epochs` of the best validation accuracy (earliest on ties).
    pub best_epoch: usize,
    pub stopped_early: bool,
    pub wall_clock: Duration,
}

impl TrainHistory {
    pub fn best(&self) -> &EpochRecord {
        &self.epochs[self.best_epoch]
    }

    /// `epoch,train_loss,val_loss,val_acc`; wall-clock time is deliberately left out so the
    /// file is reproducible.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,val_loss,val_acc\n");
        for e in &self.epochs {
            let _ = writeln!(out, "{},{},{},{}", e.epoch, e.train_loss, e.val_loss, e.val_acc);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub loss: f64,
    pub accuracy: f64,
    pub predictions: Vec<usize>,
}

/// Loss, accuracy and arg-max predictions over a labelled set.
pub fn evaluate(model: &ModelVariant, data: &LabeledSet) -> Result<Evaluation> {
    if data.is_empty() {
        return Err(Error::Data("cannot evaluate on an empty set".into()));
    }
    let views: Vec<ArrayView2<f64>> = data.inputs.iter().map(|x| x.view()).collect();
    let logits = model.forward(&views)?;
    let (loss, _) = cross_entropy(logits.view(), &data.labels)?;
    let predictions: Vec<usize> = logits
        .rows()
        .into_iter()
        .map(|r| (0..r.len()).fold(0, |best, c| if r[c] > r[best] { c } else { best }))
        .collect();
    let correct = predictions.iter().zip(&data.labels).filter(|(p, y)| p == y).count();
    Ok(Evaluation { loss, accuracy: correct as f64 / data.len() as f64, predictions })
}

/// Mini-batch Adam with early stopping on validation accuracy.
///
/// Training stops once validation accuracy has failed to improve for more than `patience`
/// consecutive epochs; the returned model holds the parameters of the best epoch.
pub fn train(mut model: ModelVariant, train_set: &LabeledSet, val_set: &LabeledSet, cfg: &TrainConfig) -> Result<(ModelVariant, TrainHistory)> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(Error::Data("training split is empty".into()));
    }
    if val_set.is_empty() {
        return Err(Error::Data("validation split is empty".into()));
    }
    let start = Instant::now();
    let adam = cfg.adam();
    let mut state = AdamState::new(model.parameters().iter().map(|(_, t)| t.len()));
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    let mut epochs = Vec::new();
    let mut best: Option<(f64, usize, ModelVariant)> = None;
    let mut stale = 0usize;
    let mut stopped_early = false;

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let xs: Vec<ArrayView2<f64>> = chunk.iter().map(|&i| train_set.inputs[i].view()).collect();
            let ys: Vec<usize> = chunk.iter().map(|&i| train_set.labels[i]).collect();
            let (loss, grads) = model.loss_and_gradients(&xs, &ys)?;
            loss_sum += loss * chunk.len() as f64;
            adam_step(&mut model.parameters_mut(), &grads, &mut state, &adam)?;
        }
        let val = evaluate(&model, val_set)?;
        epochs.push(EpochRecord {
            epoch,
            train_loss: loss_sum / train_set.len() as f64,
            val_loss: val.loss,
            val_acc: val.accuracy,
        });

        let improved = best.as_ref().is_none_or(|(acc, _, _)| val.accuracy > *acc);
        if improved {
            best = Some((val.accuracy, epochs.len() - 1, model.clone()));
            stale = 0;
        } else {
            stale += 1;
            if stale > cfg.patience {
                stopped_early = true;
                break;
            }
        }
    }

    let (_, best_epoch, best_model) = best.expect("at least one epoch ran");
    let history = TrainHistory { epochs, best_epoch, stopped_early, wall_clock: start.elapsed() };
    Ok((best_model, history))
}
