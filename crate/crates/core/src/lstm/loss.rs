use ndarray::{Array2, ArrayView2, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LossKind {
    #[serde(rename = "mse")]
    Mse,
    #[serde(rename = "logcosh")]
    LogCosh,
}

fn check(pred: &ArrayView2<f64>, labels: &ArrayView2<f64>) -> Result<()> {
    if pred.dim() != labels.dim() {
        return Err(Error::shape(format!(
            "predictions {:?} vs labels {:?}",
            pred.dim(),
            labels.dim()
        )));
    }
    Ok(())
}

/// `log(cosh(d))` without overflow: `|d| + ln(1 + e^{-2|d|}) - ln 2`.
pub fn log_cosh(d: f64) -> f64 {
    let a = d.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

/// Mean of squared residuals over every scalar entry.
pub fn loss_mse(pred: ArrayView2<f64>, labels: ArrayView2<f64>) -> Result<f64> {
    check(&pred, &labels)?;
    let n = pred.len();
    if n == 0 {
        return Ok(0.0);
    }
    let sum = Zip::from(&pred)
        .and(&labels)
        .fold(0.0, |acc, &p, &y| acc + (y - p) * (y - p));
    Ok(sum / n as f64)
}

/// Sum of `log(cosh(pred - label))` over every scalar entry.
pub fn loss_logcosh(pred: ArrayView2<f64>, labels: ArrayView2<f64>) -> Result<f64> {
    check(&pred, &labels)?;
    Ok(Zip::from(&pred)
        .and(&labels)
        .fold(0.0, |acc, &p, &y| acc + log_cosh(p - y)))
}

impl LossKind {
    pub fn value(self, pred: ArrayView2<f64>, labels: ArrayView2<f64>) -> Result<f64> {
        match self {
            LossKind::Mse => loss_mse(pred, labels),
            LossKind::LogCosh => loss_logcosh(pred, labels),
        }
    }

    /// d(loss)/d(pred), entry-wise.
    pub fn gradient(self, pred: ArrayView2<f64>, labels: ArrayView2<f64>) -> Result<Array2<f64>> {
        check(&pred, &labels)?;
        let n = pred.len().max(1) as f64;
        Ok(match self {
            LossKind::Mse => Zip::from(&pred).and(&labels).map_collect(|&p, &y| 2.0 * (p - y) / n),
            LossKind::LogCosh => Zip::from(&pred).and(&labels).map_collect(|&p, &y| (p - y).tanh()),
        })
    }
}
