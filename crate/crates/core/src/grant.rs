//! Slot-by-slot fast-uplink-grant simulation.
//!
//! At every slot the base station grants one resource to each device the
//! predictor expects to transmit. A grant is used if the device does
//! transmit and wasted otherwise; a transmission without a grant falls back
//! to a random-access request.

use std::path::Path;

use ndarray::{s, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::dataset::window;
use crate::error::{Error, Result};
use crate::lstm::LstmModel;
use crate::traffic::TransmissionRecord;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GrantStats {
    pub slots: u64,
    pub grants_issued: u64,
    pub grants_used: u64,
    pub grants_wasted: u64,
    pub ra_requests: u64,
    /// Requests an RA-only network would send over the same slots.
    pub ra_only_requests: u64,
    pub ra_reduction: f64,
    pub waste_fraction: f64,
}

impl GrantStats {
    fn finish(mut self) -> Self {
        self.ra_reduction = ratio(self.ra_only_requests - self.ra_requests, self.ra_only_requests);
        self.waste_fraction = ratio(self.grants_wasted, self.grants_issued);
        self
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

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Runs the grant loop over slots `warmup..`. The predictor sees every row
/// before the current slot and returns one 0/1 entry per device.
pub fn simulate<P>(record: &TransmissionRecord, mut predictor: P, warmup: usize) -> Result<GrantStats>
where
    P: FnMut(ArrayView2<u8>) -> Result<Vec<u8>>,
{
    if warmup >= record.total_steps() {
        return Err(Error::arg(format!(
            "warmup {warmup} leaves no slots in a record of {}",
            record.total_steps()
        )));
    }
    let n_dev = record.num_devices();
    let mut stats = GrantStats::default();
    for t in warmup..record.total_steps() {
        let pred = predictor(record.data.slice(s![..t, ..]))?;
        if pred.len() != n_dev || pred.iter().any(|&v| v > 1) {
            return Err(Error::Contract(format!(
                "slot {t}: predictor returned {:?}, expected {n_dev} binary entries",
                pred
            )));
        }
        stats.slots += 1;
        for (d, &p) in pred.iter().enumerate() {
            let actual = record.data[[t, d]] == 1;
            stats.ra_only_requests += actual as u64;
            match (p == 1, actual) {
                (true, true) => stats.grants_used += 1,
                (true, false) => stats.grants_wasted += 1,
                (false, true) => stats.ra_requests += 1,
                (false, false) => {}
            }
        }
    }
    stats.grants_issued = stats.grants_used + stats.grants_wasted;
    Ok(stats.finish())
}

/// Replays stored predictions: row `i` of `preds` is the grant decision for
/// slot `warmup + i`.
pub fn simulate_precomputed(record: &TransmissionRecord, preds: ArrayView2<u8>, warmup: usize) -> Result<GrantStats> {
    let expected = record.total_steps().saturating_sub(warmup);
    if preds.nrows() != expected {
        return Err(Error::Contract(format!(
            "{} prediction rows for {expected} slots",
            preds.nrows()
        )));
    }
    simulate(record, |hist| Ok(preds.row(hist.nrows() - warmup).to_vec()), warmup)
}

/// Thresholded LSTM predictions for every slot from `seq_len` on. Row `i`
/// predicts slot `seq_len + i`.
pub fn lstm_predictions(model: &LstmModel, record: &TransmissionRecord, seq_len: usize, threshold: f64) -> Result<Array2<u8>> {
    let ds = window(record, seq_len, 1)?;
    Ok(model.predict(ds.inputs.view())?.mapv(|p| (p >= threshold) as u8))
}

/// Grant performance next to the prediction metrics it equals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RaReductionReport {
    pub predictor: String,
    pub ra_reduction: f64,
    /// `grants_used / actual transmissions`, identical to `ra_reduction`.
    pub sensitivity: f64,
    pub waste_fraction: f64,
    pub grants_wasted: u64,
    pub ra_requests: u64,
    pub ra_only_requests: u64,
}

pub fn ra_reduction_report(predictor: &str, stats: &GrantStats) -> RaReductionReport {
    RaReductionReport {
        predictor: predictor.to_string(),
        ra_reduction: stats.ra_reduction,
        sensitivity: ratio(stats.grants_used, stats.grants_used + stats.ra_requests),
        waste_fraction: stats.waste_fraction,
        grants_wasted: stats.grants_wasted,
        ra_requests: stats.ra_requests,
        ra_only_requests: stats.ra_only_requests,
    }
}

/// Bar-chart series: `predictor,ra_reduction,waste_fraction`.
pub fn reports_csv(reports: &[RaReductionReport]) -> String {
    let mut out = String::from("predictor,ra_reduction,waste_fraction\n");
    for r in reports {
        out.push_str(&format!("{},{:.12},{:.12}\n", r.predictor, r.ra_reduction, r.waste_fraction));
    }
    out
}
