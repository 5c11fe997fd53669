use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lstm::{LossKind, OptimizerKind, TrainConfig};

/// One point of the hyper-parameter space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub batch_size: usize,
    pub dropout: f64,
    pub epochs: usize,
    /// Total LSTM layers: one input layer plus `num_hidden_layers - 1`
    /// hidden layers of `hidden_units`.
    pub num_hidden_layers: usize,
    pub hidden_units: usize,
    pub input_layer_units: usize,
    pub learning_rate: f64,
    pub loss: LossKind,
    pub optimizer: OptimizerKind,
}

impl HyperParams {
    /// Best configuration reported for the five-device scenario.
    pub fn paper_best() -> Self {
        Self {
            batch_size: 113,
            dropout: 0.27,
            epochs: 26,
            num_hidden_layers: 3,
            hidden_units: 40,
            input_layer_units: 30,
            learning_rate: 0.007,
            loss: LossKind::Mse,
            optimizer: OptimizerKind::Adam,
        }
    }

    /// Conventional untuned baseline: one 32-unit layer, lr 0.01, batch 32.
    /// With a single layer the dropout rate has no effect.
    pub fn untuned_default() -> Self {
        Self {
            batch_size: 32,
            dropout: 0.2,
            epochs: 26,
            num_hidden_layers: 1,
            hidden_units: 32,
            input_layer_units: 32,
            learning_rate: 0.01,
            loss: LossKind::Mse,
            optimizer: OptimizerKind::Adam,
        }
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        std::iter::once(self.input_layer_units)
            .chain(std::iter::repeat_n(self.hidden_units, self.num_hidden_layers.saturating_sub(1)))
            .collect()
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            batch_size: self.batch_size,
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            loss: self.loss,
            optimizer: self.optimizer,
            seed,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntRange {
    pub lo: usize,
    pub hi: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RealRange {
    pub lo: f64,
    pub hi: f64,
    /// Sample and model in log10 space.
    pub log: bool,
}

impl IntRange {
    fn contains(&self, v: usize) -> bool {
        (self.lo..=self.hi).contains(&v)
    }

    fn encode(&self, v: usize) -> f64 {
        if self.hi == self.lo {
            0.0
        } else {
            (v as f64 - self.lo as f64) / (self.hi - self.lo) as f64
        }
    }

    fn decode(&self, u: f64) -> usize {
        let v = self.lo as f64 + u.clamp(0.0, 1.0) * (self.hi - self.lo) as f64;
        (v.round() as usize).clamp(self.lo, self.hi)
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        rng.gen_range(self.lo..=self.hi)
    }
}

impl RealRange {
    fn contains(&self, v: f64) -> bool {
        v >= self.lo && v <= self.hi
    }

    fn warp(&self, v: f64) -> f64 {
        if self.log {
            v.log10()
        } else {
            v
        }
    }

    fn encode(&self, v: f64) -> f64 {
        let (lo, hi) = (self.warp(self.lo), self.warp(self.hi));
        if hi == lo {
            0.0
        } else {
            (self.warp(v) - lo) / (hi - lo)
        }
    }

    fn decode(&self, u: f64) -> f64 {
        let (lo, hi) = (self.warp(self.lo), self.warp(self.hi));
        let w = lo + u.clamp(0.0, 1.0) * (hi - lo);
        let v = if self.log { 10f64.powf(w) } else { w };
        v.clamp(self.lo, self.hi)
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.decode(rng.gen::<f64>())
    }
}

/// Ranges per hyper-parameter. A range with `lo == hi` (or a one-element
/// categorical set) pins that parameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub batch_size: IntRange,
    pub dropout: RealRange,
    pub epochs: IntRange,
    pub num_hidden_layers: IntRange,
    pub hidden_units: IntRange,
    pub input_layer_units: IntRange,
    pub learning_rate: RealRange,
    pub losses: Vec<LossKind>,
    pub optimizers: Vec<OptimizerKind>,
}

const LOSSES: [LossKind; 2] = [LossKind::Mse, LossKind::LogCosh];
const OPTIMIZERS: [OptimizerKind; 2] = [OptimizerKind::Adam, OptimizerKind::RmsProp];

/// Length of the encoded feature vector.
pub const ENCODED_DIM: usize = 7 + LOSSES.len() + OPTIMIZERS.len();

impl SearchSpace {
    /// The reference ranges: batch 32–128, dropout 0.1–0.9, epochs 1–50,
    /// 1–5 layers, 3–200 hidden units, 10–200 input units, learning rate
    /// 0.001–0.1 (log scale), MSE or log-cosh, Adam or RMSprop.
    pub fn paper() -> Self {
        Self {
            batch_size: IntRange { lo: 32, hi: 128 },
            dropout: RealRange { lo: 0.1, hi: 0.9, log: false },
            epochs: IntRange { lo: 1, hi: 50 },
            num_hidden_layers: IntRange { lo: 1, hi: 5 },
            hidden_units: IntRange { lo: 3, hi: 200 },
            input_layer_units: IntRange { lo: 10, hi: 200 },
            learning_rate: RealRange { lo: 0.001, hi: 0.1, log: true },
            losses: LOSSES.to_vec(),
            optimizers: OPTIMIZERS.to_vec(),
        }
    }

    /// Every parameter pinned to `hp`.
    pub fn pinned(hp: &HyperParams) -> Self {
        let int = |v| IntRange { lo: v, hi: v };
        let real = |v, log| RealRange { lo: v, hi: v, log };
        Self {
            batch_size: int(hp.batch_size),
            dropout: real(hp.dropout, false),
            epochs: int(hp.epochs),
            num_hidden_layers: int(hp.num_hidden_layers),
            hidden_units: int(hp.hidden_units),
            input_layer_units: int(hp.input_layer_units),
            learning_rate: real(hp.learning_rate, true),
            losses: vec![hp.loss],
            optimizers: vec![hp.optimizer],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ints = [
            ("batch_size", self.batch_size),
            ("epochs", self.epochs),
            ("num_hidden_layers", self.num_hidden_layers),
            ("hidden_units", self.hidden_units),
            ("input_layer_units", self.input_layer_units),
        ];
        for (name, r) in ints {
            if r.lo == 0 || r.lo > r.hi {
                return Err(Error::arg(format!("{name} range [{}, {}] is invalid", r.lo, r.hi)));
            }
        }
        if !(self.dropout.lo >= 0.0 && self.dropout.hi < 1.0 && self.dropout.lo <= self.dropout.hi) {
            return Err(Error::arg("dropout range must lie in [0, 1)"));
        }
        if !(self.learning_rate.lo > 0.0 && self.learning_rate.lo <= self.learning_rate.hi) {
            return Err(Error::arg("learning-rate range must be positive"));
        }
        if self.losses.is_empty() || self.optimizers.is_empty() {
            return Err(Error::arg("categorical sets must be non-empty"));
        }
        Ok(())
    }

    pub fn contains(&self, hp: &HyperParams) -> bool {
        self.batch_size.contains(hp.batch_size)
            && self.dropout.contains(hp.dropout)
            && self.epochs.contains(hp.epochs)
            && self.num_hidden_layers.contains(hp.num_hidden_layers)
            && self.hidden_units.contains(hp.hidden_units)
            && self.input_layer_units.contains(hp.input_layer_units)
            && self.learning_rate.contains(hp.learning_rate)
            && self.losses.contains(&hp.loss)
            && self.optimizers.contains(&hp.optimizer)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> HyperParams {
        HyperParams {
            batch_size: self.batch_size.sample(rng),
            dropout: self.dropout.sample(rng),
            epochs: self.epochs.sample(rng),
            num_hidden_layers: self.num_hidden_layers.sample(rng),
            hidden_units: self.hidden_units.sample(rng),
            input_layer_units: self.input_layer_units.sample(rng),
            learning_rate: self.learning_rate.sample(rng),
            loss: self.losses[rng.gen_range(0..self.losses.len())],
            optimizer: self.optimizers[rng.gen_range(0..self.optimizers.len())],
        }
    }

    /// Unit-cube features: numeric axes scaled to `[0, 1]` (learning rate
    /// in log10), then one-hot loss and optimizer.
    pub fn encode(&self, hp: &HyperParams) -> Vec<f64> {
        let mut v = vec![
            self.batch_size.encode(hp.batch_size),
            self.dropout.encode(hp.dropout),
            self.epochs.encode(hp.epochs),
            self.num_hidden_layers.encode(hp.num_hidden_layers),
            self.hidden_units.encode(hp.hidden_units),
            self.input_layer_units.encode(hp.input_layer_units),
            self.learning_rate.encode(hp.learning_rate),
        ];
        v.extend(LOSSES.iter().map(|l| (*l == hp.loss) as u8 as f64));
        v.extend(OPTIMIZERS.iter().map(|o| (*o == hp.optimizer) as u8 as f64));
        v
    }

    /// Inverse of [`encode`](Self::encode) with rounding and clamping;
    /// categoricals take the allowed option with the largest coordinate.
    pub fn decode(&self, u: &[f64]) -> HyperParams {
        let pick = |offset: usize, all: &[usize]| -> usize {
            *all.iter()
                .max_by(|&&a, &&b| u[offset + a].total_cmp(&u[offset + b]))
                .expect("non-empty")
        };
        let loss_ids: Vec<usize> = (0..LOSSES.len()).filter(|&i| self.losses.contains(&LOSSES[i])).collect();
        let opt_ids: Vec<usize> = (0..OPTIMIZERS.len()).filter(|&i| self.optimizers.contains(&OPTIMIZERS[i])).collect();
        HyperParams {
            batch_size: self.batch_size.decode(u[0]),
            dropout: self.dropout.decode(u[1]),
            epochs: self.epochs.decode(u[2]),
            num_hidden_layers: self.num_hidden_layers.decode(u[3]),
            hidden_units: self.hidden_units.decode(u[4]),
            input_layer_units: self.input_layer_units.decode(u[5]),
            learning_rate: self.learning_rate.decode(u[6]),
            loss: LOSSES[pick(7, &loss_ids)],
            optimizer: OPTIMIZERS[pick(7 + LOSSES.len(), &opt_ids)],
        }
    }
}
