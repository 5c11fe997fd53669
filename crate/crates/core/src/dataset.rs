//! Sliding-window restructuring of transmission records.

use ndarray::{s, Array2, Array3, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::traffic::TransmissionRecord;

/// Windows of `seq_len` consecutive rows, each labelled with the row that
/// follows it.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowedDataset {
    /// `num_windows × seq_len × num_devices`, entries 0.0 / 1.0.
    pub inputs: Array3<f64>,
    /// `num_windows × num_devices`.
    pub labels: Array2<f64>,
    pub seq_len: usize,
    /// Start row of each window in the source record.
    pub source_offsets: Vec<usize>,
    pub device_ids: Vec<String>,
}

impl WindowedDataset {
    pub fn len(&self) -> usize {
        self.source_offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.source_offsets.is_empty()
    }

    pub fn num_devices(&self) -> usize {
        self.inputs.len_of(Axis(2))
    }

    /// Record row holding the label of window `w`.
    pub fn label_row(&self, w: usize) -> usize {
        self.source_offsets[w] + self.seq_len
    }

    /// Windows `[start, end)` as a new dataset.
    pub fn slice(&self, start: usize, end: usize) -> WindowedDataset {
        WindowedDataset {
            inputs: self.inputs.slice(s![start..end, .., ..]).to_owned(),
            labels: self.labels.slice(s![start..end, ..]).to_owned(),
            seq_len: self.seq_len,
            source_offsets: self.source_offsets[start..end].to_vec(),
            device_ids: self.device_ids.clone(),
        }
    }

    /// Labels as 0/1 bytes, convenient for confusion counting.
    pub fn binary_labels(&self) -> Array2<u8> {
        self.labels.mapv(|v| (v >= 0.5) as u8)
    }
}

/// Windows start at `0, stride, 2·stride, …` while a label row exists.
pub fn window(record: &TransmissionRecord, seq_len: usize, stride: usize) -> Result<WindowedDataset> {
    let total = record.total_steps();
    if seq_len == 0 || seq_len >= total {
        return Err(Error::arg(format!(
            "seq_len {seq_len} must be in [1, {total}) for a {total}-step record"
        )));
    }
    if stride == 0 {
        return Err(Error::arg("stride must be at least 1"));
    }
    window_rows(record.data.view(), seq_len, stride, &record.device_ids)
}

fn window_rows(rows: ArrayView2<u8>, seq_len: usize, stride: usize, ids: &[String]) -> Result<WindowedDataset> {
    let (total, devices) = rows.dim();
    let offsets: Vec<usize> = (0..).map(|k| k * stride).take_while(|o| o + seq_len < total).collect();
    let n = offsets.len();
    let mut inputs = Array3::<f64>::zeros((n, seq_len, devices));
    let mut labels = Array2::<f64>::zeros((n, devices));
    for (w, &o) in offsets.iter().enumerate() {
        inputs
            .index_axis_mut(Axis(0), w)
            .assign(&rows.slice(s![o..o + seq_len, ..]).mapv(f64::from));
        labels.row_mut(w).assign(&rows.row(o + seq_len).mapv(f64::from));
    }
    Ok(WindowedDataset {
        inputs,
        labels,
        seq_len,
        source_offsets: offsets,
        device_ids: ids.to_vec(),
    })
}

/// Chronological split: the first `round(train_fraction · n)` windows train.
pub fn split(ds: &WindowedDataset, train_fraction: f64) -> Result<(WindowedDataset, WindowedDataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::arg(format!("train_fraction {train_fraction} outside (0, 1)")));
    }
    let n = ds.len();
    let n_train = (train_fraction * n as f64).round() as usize;
    if n_train == 0 || n_train >= n {
        return Err(Error::arg(format!(
            "train_fraction {train_fraction} on {n} windows leaves an empty partition"
        )));
    }
    Ok((ds.slice(0, n_train), ds.slice(n_train, n)))
}
