//! Confusion counts and the four reporting metrics (sensitivity, FDR,
//! accuracy, MCC), per device and pooled over devices.
//!
//! Aggregates are micro-averaged: counts are pooled first, then metrics
//! are computed once. A metric whose denominator is zero is reported as 0
//! and flagged.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn add(&mut self, other: &ConfusionCounts) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.tn += other.tn;
        self.fn_ += other.fn_;
    }

    fn record(&mut self, pred: u8, label: u8) {
        match (pred, label) {
            (1, 1) => self.tp += 1,
            (1, 0) => self.fp += 1,
            (0, 0) => self.tn += 1,
            _ => self.fn_ += 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Confusion {
    pub per_device: Vec<ConfusionCounts>,
    pub pooled: ConfusionCounts,
}

/// Counts per device column and pooled. Both inputs must be 0/1.
pub fn confusion(pred: ArrayView2<u8>, labels: ArrayView2<u8>) -> Result<Confusion> {
    if pred.dim() != labels.dim() {
        return Err(Error::shape(format!("predictions {:?} vs labels {:?}", pred.dim(), labels.dim())));
    }
    if pred.iter().chain(labels.iter()).any(|&v| v > 1) {
        return Err(Error::arg("confusion inputs must be 0 or 1"));
    }
    let mut per_device = vec![ConfusionCounts::default(); pred.ncols()];
    for (p_row, l_row) in pred.rows().into_iter().zip(labels.rows()) {
        for (d, (&p, &l)) in p_row.iter().zip(l_row.iter()).enumerate() {
            per_device[d].record(p, l);
        }
    }
    let mut pooled = ConfusionCounts::default();
    for c in &per_device {
        pooled.add(c);
    }
    Ok(Confusion { per_device, pooled })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MetricFlag {
    /// `tp + fn = 0`: no actual positives.
    SensitivityUndefined,
    /// `tp + fp = 0`: no predicted positives.
    FdrUndefined,
    MccUndefined,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub sensitivity: f64,
    pub fdr: f64,
    pub accuracy: f64,
    pub mcc: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<MetricFlag>,
}

impl Metrics {
    pub const NAMES: [&'static str; 4] = ["sensitivity", "fdr", "accuracy", "mcc"];

    pub fn get(&self, name: &str) -> Option<f64> {
        match name {
            "sensitivity" => Some(self.sensitivity),
            "fdr" => Some(self.fdr),
            "accuracy" => Some(self.accuracy),
            "mcc" => Some(self.mcc),
            _ => None,
        }
    }

    fn values(&self) -> [f64; 4] {
        [self.sensitivity, self.fdr, self.accuracy, self.mcc]
    }
}

pub fn metrics(c: &ConfusionCounts) -> Result<Metrics> {
    let total = c.total();
    if total == 0 {
        return Err(Error::arg("metrics of an empty confusion matrix"));
    }
    let mut flags = Vec::new();
    let (tp, fp, tn, fn_) = (c.tp as f64, c.fp as f64, c.tn as f64, c.fn_ as f64);

    let sensitivity = if c.tp + c.fn_ == 0 {
        flags.push(MetricFlag::SensitivityUndefined);
        0.0
    } else {
        tp / (tp + fn_)
    };
    let fdr = if c.tp + c.fp == 0 {
        flags.push(MetricFlag::FdrUndefined);
        0.0
    } else {
        fp / (tp + fp)
    };
    let accuracy = (tp + tn) / total as f64;
    let denom = (tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_);
    let mcc = if denom == 0.0 {
        flags.push(MetricFlag::MccUndefined);
        0.0
    } else {
        let num = c.tp as i128 * c.tn as i128 - c.fp as i128 * c.fn_ as i128;
        num as f64 / denom.sqrt()
    };
    Ok(Metrics {
        sensitivity,
        fdr,
        accuracy,
        mcc,
        flags,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScopeMetrics {
    /// Device id, or `"aggregate"`.
    pub scope: String,
    pub counts: ConfusionCounts,
    pub metrics: Metrics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub predictor: String,
    pub dataset: String,
    pub devices: Vec<ScopeMetrics>,
    pub aggregate: ScopeMetrics,
}

pub const AGGREGATE: &str = "aggregate";

/// Builds a report from binary predictions and labels (`steps × devices`).
pub fn evaluate(predictor: &str, dataset: &str, device_ids: &[String], pred: ArrayView2<u8>, labels: ArrayView2<u8>) -> Result<EvalReport> {
    if device_ids.len() != pred.ncols() {
        return Err(Error::shape(format!("{} device ids for {} columns", device_ids.len(), pred.ncols())));
    }
    let c = confusion(pred, labels)?;
    let devices = device_ids
        .iter()
        .zip(&c.per_device)
        .map(|(id, counts)| {
            Ok(ScopeMetrics {
                scope: id.clone(),
                counts: *counts,
                metrics: metrics(counts)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalReport {
        predictor: predictor.to_string(),
        dataset: dataset.to_string(),
        devices,
        aggregate: ScopeMetrics {
            scope: AGGREGATE.to_string(),
            counts: c.pooled,
            metrics: metrics(&c.pooled)?,
        },
    })
}

impl EvalReport {
    pub fn device(&self, id: &str) -> Option<&ScopeMetrics> {
        self.devices.iter().find(|d| d.scope == id)
    }

    fn scopes(&self) -> impl Iterator<Item = &ScopeMetrics> {
        self.devices.iter().chain(std::iter::once(&self.aggregate))
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

/// Differences of every metric against the first (baseline) report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaTable {
    pub dataset: String,
    pub baseline: String,
    pub others: Vec<String>,
    pub rows: Vec<DeltaRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaRow {
    pub scope: String,
    pub metric: String,
    pub baseline: f64,
    /// `other - baseline`, one entry per report after the first.
    pub deltas: Vec<f64>,
}

pub fn compare(reports: &[EvalReport]) -> Result<DeltaTable> {
    let [base, rest @ ..] = reports else {
        return Err(Error::arg("compare needs at least two reports"));
    };
    if rest.is_empty() {
        return Err(Error::arg("compare needs at least two reports"));
    }
    for r in rest {
        if r.dataset != base.dataset {
            return Err(Error::arg(format!(
                "report {} is over dataset {}, baseline over {}",
                r.predictor, r.dataset, base.dataset
            )));
        }
        let same_scopes = r.devices.len() == base.devices.len()
            && r.devices.iter().zip(&base.devices).all(|(a, b)| a.scope == b.scope);
        if !same_scopes {
            return Err(Error::arg(format!("report {} covers different devices", r.predictor)));
        }
    }
    let mut rows = Vec::new();
    let base_scopes: Vec<&ScopeMetrics> = base.scopes().collect();
    for (s, scope) in base_scopes.iter().enumerate() {
        for (m, name) in Metrics::NAMES.iter().enumerate() {
            let b = scope.metrics.values()[m];
            let deltas = rest
                .iter()
                .map(|r| r.scopes().nth(s).expect("same scopes").metrics.values()[m] - b)
                .collect();
            rows.push(DeltaRow {
                scope: scope.scope.clone(),
                metric: name.to_string(),
                baseline: b,
                deltas,
            });
        }
    }
    Ok(DeltaTable {
        dataset: base.dataset.clone(),
        baseline: base.predictor.clone(),
        others: rest.iter().map(|r| r.predictor.clone()).collect(),
        rows,
    })
}

impl DeltaTable {
    pub fn delta(&self, scope: &str, metric: &str, other: usize) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.scope == scope && r.metric == metric)
            .and_then(|r| r.deltas.get(other).copied())
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("scope,metric,{}", self.baseline);
        for o in &self.others {
            let _ = write!(out, ",delta_{o}");
        }
        out.push('\n');
        for r in &self.rows {
            let _ = write!(out, "{},{},{:.12}", r.scope, r.metric, r.baseline);
            for d in &r.deltas {
                let _ = write!(out, ",{d:.12}");
            }
            out.push('\n');
        }
        out
    }
}

/// Aggregate metric series as `metric,predictor,value` rows.
pub fn metric_series_csv(reports: &[EvalReport]) -> String {
    let mut out = String::from("metric,predictor,value\n");
    for name in Metrics::NAMES {
        for r in reports {
            let _ = writeln!(out, "{name},{},{:.12}", r.predictor, r.aggregate.metrics.get(name).unwrap_or(0.0));
        }
    }
    out
}
