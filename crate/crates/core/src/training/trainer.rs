use std::fs::File;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Checkpoint, HyperParams, TrainingError};
use crate::gnn::{GnnError, GnnStack};
use crate::graph::{batch_graphs, SocialGraph};
use crate::tensor::{Adam, TensorError};

/// Stream offset separating the shuffling/dropout RNG from weight initialization.
const SHUFFLE_STREAM: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Patience,
    MaxEpochs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Improved,
    Continue,
    Stop,
}

/// Stops after `patience` consecutive epochs without a strict improvement.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    since_best: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best: f64::INFINITY,
            since_best: 0,
        }
    }

    pub fn best(&self) -> f64 {
        self.best
    }

    pub fn update(&mut self, dev_loss: f64) -> StopDecision {
        if dev_loss < self.best {
            self.best = dev_loss;
            self.since_best = 0;
            StopDecision::Improved
        } else {
            self.since_best += 1;
            if self.since_best >= self.patience {
                StopDecision::Stop
            } else {
                StopDecision::Continue
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub train_mse: Vec<f64>,
    pub dev_mse: Vec<f64>,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: usize,
    pub best_dev_mse: f64,
    pub stop_reason: StopReason,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_mse: f64,
    pub dev_mse: f64,
    pub seconds: f64,
}

/// CSV training log with columns `epoch,train_mse,dev_mse,seconds`.
pub struct TrainingLog {
    writer: csv::Writer<File>,
}

impl TrainingLog {
    pub fn create(path: impl AsRef<Path>) -> Result<Self, TrainingError> {
        let mut writer = csv::Writer::from_path(path)?;
        writer.write_record(["epoch", "train_mse", "dev_mse", "seconds"])?;
        writer.flush()?;
        Ok(Self { writer })
    }

    pub fn record(&mut self, r: &EpochRecord) -> Result<(), TrainingError> {
        self.writer.write_record([
            r.epoch.to_string(),
            r.train_mse.to_string(),
            r.dev_mse.to_string(),
            format!("{:.3}", r.seconds),
        ])?;
        self.writer.flush()?;
        Ok(())
    }
}

fn nonfinite(epoch: usize, batch: usize, e: GnnError) -> TrainingError {
    match e {
        GnnError::Tensor(TensorError::NonFinite { op }) => TrainingError::NonFiniteLoss {
            epoch,
            batch,
            detail: format!("non-finite value in {op}"),
        },
        other => other.into(),
    }
}

/// Trains a fresh model and returns the parameters of the epoch with the
/// lowest dev MSE. `on_epoch` sees every completed epoch.
pub fn train(
    hp: &HyperParams,
    train_set: &[&SocialGraph],
    dev_set: &[&SocialGraph],
    manifest_sha256: &str,
    on_epoch: &mut dyn FnMut(&EpochRecord) -> Result<(), TrainingError>,
) -> Result<Checkpoint, TrainingError> {
    hp.validate()?;
    if train_set.is_empty() {
        return Err(TrainingError::EmptySplit("train"));
    }
    if dev_set.is_empty() {
        return Err(TrainingError::EmptySplit("dev"));
    }
    let mut model = GnnStack::new(hp.model_config(), hp.rng_seed)?;
    let mut adam = Adam::new(&model.params, hp.learning_rate, hp.weight_decay);
    let mut rng = ChaCha8Rng::seed_from_u64(hp.rng_seed ^ SHUFFLE_STREAM);
    let mut stopper = EarlyStopping::new(hp.patience);
    let mut best_params = model.params.clone();
    let mut history = TrainHistory {
        train_mse: Vec::new(),
        dev_mse: Vec::new(),
        best_epoch: 0,
        best_dev_mse: f64::INFINITY,
        stop_reason: StopReason::MaxEpochs,
    };
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    for epoch in 1..=hp.max_epochs {
        let started = Instant::now();
        order.shuffle(&mut rng);
        let mut weighted = 0.0;
        for (b, chunk) in order.chunks(hp.batch_size).enumerate() {
            let graphs: Vec<&SocialGraph> = chunk.iter().map(|&i| train_set[i]).collect();
            let batch = batch_graphs(&graphs)?;
            let dropout: Option<&mut dyn rand::RngCore> = if hp.dropout > 0.0 { Some(&mut rng) } else { None };
            let (loss, grads) = model
                .loss_and_gradients(&batch, dropout)
                .map_err(|e| nonfinite(epoch, b, e))?;
            if !loss.is_finite() || grads.iter().any(|g| !g.is_finite()) {
                return Err(TrainingError::NonFiniteLoss {
                    epoch,
                    batch: b,
                    detail: format!("loss {loss}"),
                });
            }
            adam.step(&mut model.params, &grads)?;
            weighted += loss * chunk.len() as f64;
        }
        let train_mse = weighted / train_set.len() as f64;
        let dev_mse = evaluate(&model, dev_set, hp.batch_size)?;
        history.train_mse.push(train_mse);
        history.dev_mse.push(dev_mse);
        on_epoch(&EpochRecord {
            epoch,
            train_mse,
            dev_mse,
            seconds: started.elapsed().as_secs_f64(),
        })?;
        match stopper.update(dev_mse) {
            StopDecision::Improved => {
                best_params = model.params.clone();
                history.best_epoch = epoch;
                history.best_dev_mse = dev_mse;
            }
            StopDecision::Continue => {}
            StopDecision::Stop => {
                history.stop_reason = StopReason::Patience;
                break;
            }
        }
    }
    model.params = best_params;
    Ok(Checkpoint {
        model,
        hyperparams: hp.clone(),
        history: Some(history),
        manifest_sha256: manifest_sha256.to_string(),
    })
}

/// Mean squared error over every sample and both outputs. Errors are
/// accumulated per sample, so the result does not depend on `batch_size`.
pub fn evaluate(model: &GnnStack, graphs: &[&SocialGraph], batch_size: usize) -> Result<f64, TrainingError> {
    if graphs.is_empty() {
        return Err(TrainingError::EmptySplit("evaluation"));
    }
    let mut sum = 0.0;
    for chunk in graphs.chunks(batch_size.max(1)) {
        let batch = batch_graphs(chunk)?;
        let pred = model.predict(&batch)?;
        for (p, t) in pred.data().iter().zip(batch.labels.data()) {
            sum += (p - t) * (p - t);
        }
    }
    Ok(sum / (2 * graphs.len()) as f64)
}

/// Model outputs, one `[q1, q2]` row per graph.
pub fn predictions(model: &GnnStack, graphs: &[&SocialGraph], batch_size: usize) -> Result<Vec<[f64; 2]>, TrainingError> {
    let mut out = Vec::with_capacity(graphs.len());
    for chunk in graphs.chunks(batch_size.max(1)) {
        let pred = model.predict(&batch_graphs(chunk)?)?;
        out.extend((0..chunk.len()).map(|i| [pred.get(i, 0), pred.get(i, 1)]));
    }
    Ok(out)
}

/// MSE on `eval` of a predictor that always outputs the mean label of `fit`.
pub fn constant_baseline_mse(fit: &[&SocialGraph], eval: &[&SocialGraph]) -> f64 {
    let mut mean = [0.0; 2];
    for g in fit {
        mean[0] += g.labels[0];
        mean[1] += g.labels[1];
    }
    let n = fit.len().max(1) as f64;
    mean = mean.map(|m| m / n);
    let sum: f64 = eval
        .iter()
        .map(|g| (g.labels[0] - mean[0]).powi(2) + (g.labels[1] - mean[1]).powi(2))
        .sum();
    sum / (2 * eval.len().max(1)) as f64
}
