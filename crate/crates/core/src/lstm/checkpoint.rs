//! JSON checkpoints. Weights are the concatenation of
//! [`LstmModel::param_tensors`] as little-endian `f64`, base64-encoded.

use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::model::{LstmLayer, LstmModel};
use super::train::TrainConfig;
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub num_devices: usize,
    pub layer_sizes: Vec<usize>,
    pub dropout_rate: f64,
    pub seq_len: usize,
    pub device_ids: Vec<String>,
    pub train_config: Option<TrainConfig>,
    pub num_params: usize,
    pub weights: String,
}

impl Checkpoint {
    pub fn from_model(model: &LstmModel, seq_len: usize, device_ids: Vec<String>, train_config: Option<TrainConfig>) -> Self {
        let mut bytes = Vec::with_capacity(model.num_params() * 8);
        for t in model.param_tensors() {
            for v in t {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
        }
        Self {
            version: CHECKPOINT_VERSION,
            num_devices: model.num_devices(),
            layer_sizes: model.layer_sizes(),
            dropout_rate: model.dropout_rate(),
            seq_len,
            device_ids,
            train_config,
            num_params: model.num_params(),
            weights: STANDARD.encode(bytes),
        }
    }

    pub fn to_model(&self) -> Result<LstmModel> {
        if self.version != CHECKPOINT_VERSION {
            return Err(Error::arg(format!("unsupported checkpoint version {}", self.version)));
        }
        let bytes = STANDARD
            .decode(&self.weights)
            .map_err(|e| Error::arg(format!("weights payload: {e}")))?;
        if bytes.len() != self.num_params * 8 {
            return Err(Error::shape(format!("{} weight bytes for {} parameters", bytes.len(), self.num_params)));
        }
        let mut values = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
        let mut take = |n: usize| -> Result<Vec<f64>> {
            let v: Vec<f64> = values.by_ref().take(n).collect();
            (v.len() == n).then_some(v).ok_or_else(|| Error::shape("weight payload too short"))
        };
        let mut layers = Vec::new();
        let mut input = self.num_devices;
        for &h in &self.layer_sizes {
            let w_x = Array2::from_shape_vec((input, 4 * h), take(input * 4 * h)?).map_err(|e| Error::shape(e.to_string()))?;
            let w_h = Array2::from_shape_vec((h, 4 * h), take(h * 4 * h)?).map_err(|e| Error::shape(e.to_string()))?;
            let bias = Array1::from(take(4 * h)?);
            layers.push(LstmLayer { w_x, w_h, bias });
            input = h;
        }
        let dense_w = Array2::from_shape_vec((input, self.num_devices), take(input * self.num_devices)?)
            .map_err(|e| Error::shape(e.to_string()))?;
        let dense_b = Array1::from(take(self.num_devices)?);
        let model = LstmModel::from_parts(layers, dense_w, dense_b, self.dropout_rate)?;
        if model.num_params() != self.num_params {
            return Err(Error::shape("parameter count does not match layer sizes"));
        }
        Ok(model)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::data(path, e.to_string()))
    }
}
