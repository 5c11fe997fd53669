//! Adam and RMSprop over flat parameter tensors.

use serde::{Deserialize, Serialize};

use super::model::{Gradients, LstmModel};
use crate::error::{Error, Result};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const RMSPROP_RHO: f64 = 0.9;
pub const EPSILON: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OptimizerKind {
    #[serde(rename = "adam")]
    Adam,
    #[serde(rename = "rmsprop")]
    RmsProp,
}

/// One Adam update at step `t` (1-based) with bias correction.
pub fn adam_step(params: &mut [f64], grads: &[f64], m: &mut [f64], v: &mut [f64], t: u64, lr: f64) -> Result<()> {
    if grads.len() != params.len() || m.len() != params.len() || v.len() != params.len() {
        return Err(Error::shape(format!(
            "adam: params {}, grads {}, m {}, v {}",
            params.len(),
            grads.len(),
            m.len(),
            v.len()
        )));
    }
    let bc1 = 1.0 - ADAM_BETA1.powf(t as f64);
    let bc2 = 1.0 - ADAM_BETA2.powf(t as f64);
    for i in 0..params.len() {
        let g = grads[i];
        m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * g;
        v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * g * g;
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + EPSILON);
    }
    Ok(())
}

/// One RMSprop update; `v` holds the running mean of squared gradients.
pub fn rmsprop_step(params: &mut [f64], grads: &[f64], v: &mut [f64], lr: f64) -> Result<()> {
    if grads.len() != params.len() || v.len() != params.len() {
        return Err(Error::shape(format!(
            "rmsprop: params {}, grads {}, v {}",
            params.len(),
            grads.len(),
            v.len()
        )));
    }
    for i in 0..params.len() {
        let g = grads[i];
        v[i] = RMSPROP_RHO * v[i] + (1.0 - RMSPROP_RHO) * g * g;
        params[i] -= lr * g / (v[i].sqrt() + EPSILON);
    }
    Ok(())
}

/// Per-tensor moment buffers for a whole model.
#[derive(Clone, Debug)]
pub struct OptimizerState {
    pub kind: OptimizerKind,
    pub step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind, model: &LstmModel) -> Self {
        let zeros: Vec<Vec<f64>> = model.param_tensors().iter().map(|t| vec![0.0; t.len()]).collect();
        Self {
            kind,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn apply(&mut self, model: &mut LstmModel, grads: &Gradients, lr: f64) -> Result<()> {
        let mut params = model.param_tensors_mut();
        if params.len() != grads.tensors.len() || params.len() != self.v.len() {
            return Err(Error::shape(format!(
                "{} parameter tensors, {} gradient tensors, {} state tensors",
                params.len(),
                grads.tensors.len(),
                self.v.len()
            )));
        }
        self.step += 1;
        for (k, p) in params.iter_mut().enumerate() {
            match self.kind {
                OptimizerKind::Adam => adam_step(p, &grads.tensors[k], &mut self.m[k], &mut self.v[k], self.step, lr)?,
                OptimizerKind::RmsProp => rmsprop_step(p, &grads.tensors[k], &mut self.v[k], lr)?,
            }
        }
        Ok(())
    }
}
