use std::path::Path;

use ndarray::{Array2, Array3, ArrayView2, Axis, Zip};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::loss::LossKind;
use super::model::LstmModel;
use super::optim::{OptimizerKind, OptimizerState};
use crate::dataset::WindowedDataset;
use crate::error::{Error, Result};
use crate::seed::{self, stream};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub loss: LossKind,
    pub optimizer: OptimizerKind,
    /// Drives per-epoch shuffling and dropout masks.
    pub seed: u64,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::arg("batch_size must be at least 1"));
        }
        if self.epochs == 0 {
            return Err(Error::arg("epochs must be at least 1"));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::arg(format!("learning rate {} must be finite and non-negative", self.learning_rate)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    /// 1-based.
    pub epoch: usize,
    pub loss: f64,
    pub binary_accuracy: f64,
}

/// Per-epoch training loss and binary accuracy, accumulated over the
/// epoch's minibatches in training mode (predictions taken before each
/// update, dropout active).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochStats>,
}

impl TrainHistory {
    pub fn final_accuracy(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.binary_accuracy)
    }

    /// First epoch (1-based) whose accuracy reaches `target`.
    pub fn epochs_to_reach(&self, target: f64) -> Option<usize> {
        self.epochs.iter().find(|e| e.binary_accuracy >= target).map(|e| e.epoch)
    }

    /// `epoch,loss,binary_accuracy` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,loss,binary_accuracy\n");
        for e in &self.epochs {
            out.push_str(&format!("{},{:.12},{:.12}\n", e.epoch, e.loss, e.binary_accuracy));
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Fraction of entries where `(pred >= threshold)` equals the label.
pub fn binary_accuracy(pred: ArrayView2<f64>, labels: ArrayView2<f64>, threshold: f64) -> Result<f64> {
    let correct = correct_count(pred, labels, threshold)?;
    Ok(if pred.is_empty() { 0.0 } else { correct as f64 / pred.len() as f64 })
}

fn correct_count(pred: ArrayView2<f64>, labels: ArrayView2<f64>, threshold: f64) -> Result<usize> {
    if pred.dim() != labels.dim() {
        return Err(Error::shape(format!("predictions {:?} vs labels {:?}", pred.dim(), labels.dim())));
    }
    Ok(Zip::from(&pred)
        .and(&labels)
        .fold(0usize, |n, &p, &y| n + (((p >= threshold) as u8 as f64) == y) as usize))
}

/// Gathers windows `idx` into a `batch × seq_len × devices` tensor and labels.
pub(crate) fn gather(ds: &WindowedDataset, idx: &[usize]) -> (Array3<f64>, Array2<f64>) {
    (ds.inputs.select(Axis(0), idx), ds.labels.select(Axis(0), idx))
}

/// Minibatch training. Windows are reshuffled every epoch; the last short
/// batch is kept.
pub fn train(mut model: LstmModel, ds: &WindowedDataset, cfg: &TrainConfig) -> Result<(LstmModel, TrainHistory)> {
    cfg.validate()?;
    if ds.is_empty() {
        return Err(Error::arg("cannot train on an empty dataset"));
    }
    if ds.num_devices() != model.num_devices() {
        return Err(Error::shape(format!(
            "dataset has {} devices, model expects {}",
            ds.num_devices(),
            model.num_devices()
        )));
    }
    let mut opt = OptimizerState::new(cfg.optimizer, &model);
    let mut history = TrainHistory::default();
    let n = ds.len();
    let mut order: Vec<usize> = (0..n).collect();

    for epoch in 1..=cfg.epochs {
        let mut shuffle_rng = seed::rng(cfg.seed, stream::SHUFFLE, epoch as u64);
        let mut dropout_rng = seed::rng(cfg.seed, stream::DROPOUT, epoch as u64);
        order.sort_unstable();
        order.shuffle(&mut shuffle_rng);

        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let (x, y) = gather(ds, chunk);
            let (pred, cache) = model.forward(x.view(), true, &mut dropout_rng)?;
            let loss = cfg.loss.value(pred.view(), y.view())?;
            if !loss.is_finite() {
                return Err(Error::Numeric(format!("non-finite loss at epoch {epoch}")));
            }
            loss_sum += loss * chunk.len() as f64;
            correct += correct_count(pred.view(), y.view(), 0.5)?;
            let grads = model.backward(&cache, y.view(), cfg.loss)?;
            opt.apply(&mut model, &grads, cfg.learning_rate)?;
        }
        history.epochs.push(EpochStats {
            epoch,
            loss: loss_sum / n as f64,
            binary_accuracy: correct as f64 / (n * ds.num_devices()) as f64,
        });
    }
    if model.param_tensors().iter().any(|t| t.iter().any(|v| !v.is_finite())) {
        return Err(Error::Numeric("parameters diverged".into()));
    }
    Ok((model, history))
}
