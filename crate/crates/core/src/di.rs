//! Directed-information causal discovery and a rule-based next-step
//! predictor built on the discovered graph.
//!
//! The estimator is a fixed-order plug-in: with memory `k`, step `i`
//! contributes the conditional mutual information between the source
//! context `x[i-k..=i]` and the target `y[i]` given the target's own past
//! `y[i-k..i]`. Joint counts get add-½ smoothing over the full alphabet and
//! both conditional entropies come from that one smoothed joint, so the
//! estimate is never negative. Values are bits per step.

use std::path::Path;

use ndarray::ArrayView2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::{self, stream};
use crate::traffic::TransmissionRecord;

pub const DEFAULT_ORDER: usize = 3;
pub const DEFAULT_THRESHOLD: f64 = 0.02;
pub const DEFAULT_MAX_LAG: usize = 4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiEstimate {
    pub source: String,
    pub target: String,
    /// Bits per step.
    pub value: f64,
    pub order: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub source: String,
    pub target: String,
    pub lag: usize,
    /// Directed information of the edge, bits per step.
    pub strength: f64,
    /// Empirical `P(target at t + lag | source at t)`.
    pub trigger_prob: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CausalGraph {
    pub device_ids: Vec<String>,
    pub order: usize,
    pub threshold: f64,
    pub edges: Vec<Edge>,
}

/// Minimum series length for memory `k`.
pub fn min_length(k: usize) -> usize {
    10 << (2 * k)
}

fn check_lengths(k: usize, series: &[&[u8]]) -> Result<usize> {
    if k == 0 || k > 12 {
        return Err(Error::arg(format!("order must lie in 1..=12, got {k}")));
    }
    let n = series[0].len();
    if series.iter().any(|s| s.len() != n) {
        return Err(Error::arg("series lengths differ"));
    }
    if n < min_length(k) {
        return Err(Error::InsufficientData(format!(
            "{n} steps, order {k} needs at least {}",
            min_length(k)
        )));
    }
    Ok(n)
}

/// Bits `s[i-width+1..=i]` packed with the most recent in bit 0.
fn code(s: &[u8], i: usize, width: usize) -> usize {
    (0..width).fold(0, |acc, j| acc | ((s[i - j] as usize) << j))
}

fn entropy_bits(counts: &[f64]) -> f64 {
    let total: f64 = counts.iter().sum();
    counts
        .iter()
        .filter(|&&c| c > 0.0)
        .map(|&c| -(c / total) * (c / total).log2())
        .sum()
}

/// `H(Y | A) - H(Y | A, B)` in bits from add-½-smoothed counts of
/// `(a, b, y)` triples.
fn conditional_gain(triples: impl Iterator<Item = (usize, usize, u8)>, a_size: usize, b_size: usize) -> f64 {
    let mut joint = vec![0.5f64; a_size * b_size * 2];
    for (a, b, y) in triples {
        joint[(a * b_size + b) * 2 + y as usize] += 1.0;
    }
    let total: f64 = joint.iter().sum();
    // H(Y|A) = H(A,Y) - H(A); H(Y|A,B) = H(A,B,Y) - H(A,B)
    let mut ay = vec![0.0; a_size * 2];
    let mut ab = vec![0.0; a_size * b_size];
    for a in 0..a_size {
        for b in 0..b_size {
            for y in 0..2 {
                let c = joint[(a * b_size + b) * 2 + y];
                ay[a * 2 + y] += c;
                ab[a * b_size + b] += c;
            }
        }
    }
    let a_only: Vec<f64> = (0..a_size).map(|a| ay[a * 2] + ay[a * 2 + 1]).collect();
    let h = |v: &[f64]| entropy_bits(v) * v.iter().sum::<f64>() / total;
    (h(&ay) - h(&a_only)) - (h(&joint) - h(&ab))
}

fn di_raw(x: &[u8], y: &[u8], k: usize) -> f64 {
    let triples = (k..y.len()).map(|i| (code(y, i - 1, k), code(x, i, k + 1), y[i]));
    conditional_gain(triples, 1 << k, 1 << (k + 1))
}

fn conditional_di_raw(x: &[u8], y: &[u8], z: &[u8], k: usize) -> f64 {
    let triples = (k..y.len()).map(|i| ((code(y, i - 1, k) << (k + 1)) | code(z, i, k + 1), code(x, i, k + 1), y[i]));
    conditional_gain(triples, 1 << (2 * k + 1), 1 << (k + 1))
}

/// Expected plug-in estimate of the conditional DI when `x` adds nothing:
/// `(|B| - 1) · |A_observed| / (2 N ln 2)` bits.
fn conditional_null_bias(y: &[u8], z: &[u8], k: usize) -> f64 {
    let mut seen = vec![false; 1 << (2 * k + 1)];
    for i in k..y.len() {
        seen[(code(y, i - 1, k) << (k + 1)) | code(z, i, k + 1)] = true;
    }
    let contexts = seen.iter().filter(|&&s| s).count() as f64;
    let n = (y.len() - k) as f64;
    (((1 << (k + 1)) - 1) as f64) * contexts / (2.0 * n * std::f64::consts::LN_2)
}

/// Directed information from `x` to `y` with memory `k`, bits per step.
pub fn directed_information(x: &[u8], y: &[u8], k: usize) -> Result<f64> {
    check_lengths(k, &[x, y])?;
    Ok(di_raw(x, y, k))
}

/// Directed information from `x` to `y` causally conditioned on `z`: what
/// `x` adds once both `y`'s past and `z`'s context are known.
pub fn conditional_directed_information(x: &[u8], y: &[u8], z: &[u8], k: usize) -> Result<f64> {
    check_lengths(k, &[x, y, z])?;
    Ok(conditional_di_raw(x, y, z, k))
}

/// `DI(source -> target)` for every ordered pair of record columns.
pub fn pairwise_estimates(record: &TransmissionRecord, k: usize) -> Result<Vec<DiEstimate>> {
    let cols = columns(record);
    let mut out = Vec::new();
    for (s, xs) in cols.iter().enumerate() {
        for (d, ys) in cols.iter().enumerate() {
            if s != d {
                out.push(DiEstimate {
                    source: record.device_ids[s].clone(),
                    target: record.device_ids[d].clone(),
                    value: directed_information(xs, ys, k)?,
                    order: k,
                });
            }
        }
    }
    Ok(out)
}

fn columns(record: &TransmissionRecord) -> Vec<Vec<u8>> {
    (0..record.num_devices()).map(|d| record.column(d).to_vec()).collect()
}

/// `P(y[t + lag] = 1 | x[t] = 1)` over the whole series; `None` if `x`
/// never fires early enough.
fn lagged_trigger_prob(x: &[u8], y: &[u8], lag: usize) -> Option<f64> {
    let (mut hits, mut total) = (0usize, 0usize);
    for t in 0..x.len().saturating_sub(lag) {
        if x[t] == 1 {
            total += 1;
            hits += y[t + lag] as usize;
        }
    }
    (total > 0).then(|| hits as f64 / total as f64)
}

/// Keeps every ordered pair whose directed information reaches
/// `threshold`, then drops edges explained by another kept parent of the
/// same target: conditional directed information, less its small-sample
/// bias, below `threshold`. That bias grows with the conditioning context,
/// so records much shorter than a few thousand events lose true edges.
/// Each surviving edge gets the lag in `1..=max_lag` with the highest
/// trigger frequency.
pub fn infer_causal_graph(record: &TransmissionRecord, max_lag: usize, k: usize, threshold: f64) -> Result<CausalGraph> {
    if max_lag == 0 {
        return Err(Error::arg("max_lag must be at least 1"));
    }
    if threshold.is_nan() {
        return Err(Error::arg("threshold is NaN"));
    }
    let cols = columns(record);
    let n = cols.len();
    let mut strength = vec![vec![None; n]; n];
    for s in 0..n {
        for d in 0..n {
            if s != d {
                let v = directed_information(&cols[s], &cols[d], k)?;
                if v >= threshold {
                    strength[s][d] = Some(v);
                }
            }
        }
    }

    let mut edges = Vec::new();
    for d in 0..n {
        let parents: Vec<usize> = (0..n).filter(|&s| strength[s][d].is_some()).collect();
        for &s in &parents {
            let explained = parents
                .iter()
                .filter(|&&c| c != s)
                .any(|&c| {
                    let gain = conditional_di_raw(&cols[s], &cols[d], &cols[c], k);
                    gain - conditional_null_bias(&cols[d], &cols[c], k) < threshold
                });
            if explained {
                continue;
            }
            let (lag, trigger_prob) = (1..=max_lag)
                .filter_map(|l| lagged_trigger_prob(&cols[s], &cols[d], l).map(|p| (l, p)))
                .fold((1, 0.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            edges.push(Edge {
                source: record.device_ids[s].clone(),
                target: record.device_ids[d].clone(),
                lag,
                strength: strength[s][d].expect("kept parent"),
                trigger_prob,
            });
        }
    }
    edges.sort_by(|a, b| (&a.source, &a.target).cmp(&(&b.source, &b.target)));
    Ok(CausalGraph {
        device_ids: record.device_ids.clone(),
        order: k,
        threshold,
        edges,
    })
}

/// Threshold from a null distribution: the `quantile` of directed
/// information over all ordered pairs after circularly shifting the source
/// by a random offset, `rounds` times per pair. Shifting keeps each
/// series' own statistics while breaking cross-device timing.
pub fn calibrate_threshold(record: &TransmissionRecord, k: usize, rounds: usize, quantile: f64, seed: u64) -> Result<f64> {
    if rounds == 0 || !(0.0..=1.0).contains(&quantile) {
        return Err(Error::arg("rounds must be ≥ 1 and quantile in [0, 1]"));
    }
    let cols = columns(record);
    let len = record.total_steps();
    let mut null = Vec::new();
    let mut counter = 0u64;
    for s in 0..cols.len() {
        for d in 0..cols.len() {
            if s == d {
                continue;
            }
            for _ in 0..rounds {
                let mut rng = seed::rng(seed, stream::PERMUTE, counter);
                counter += 1;
                let offset = rng.gen_range(len / 4..=3 * len / 4);
                let mut shifted = cols[s].clone();
                shifted.rotate_left(offset);
                null.push(directed_information(&shifted, &cols[d], k)?);
            }
        }
    }
    null.sort_by(f64::total_cmp);
    let idx = ((null.len() - 1) as f64 * quantile).round() as usize;
    Ok(null[idx])
}

impl CausalGraph {
    pub fn max_lag(&self) -> usize {
        self.edges.iter().map(|e| e.lag).max().unwrap_or(0)
    }

    pub fn has_edge(&self, source: &str, target: &str) -> bool {
        self.edges.iter().any(|e| e.source == source && e.target == target)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let g: Self = serde_json::from_str(&text).map_err(|e| Error::data(path, e.to_string()))?;
        if g.edges.iter().any(|e| e.lag == 0 || !g.device_ids.contains(&e.source) || !g.device_ids.contains(&e.target)) {
            return Err(Error::data(path, "edge with zero lag or unknown device"));
        }
        Ok(g)
    }
}

/// Next-step prediction from the most recent rows of `history` (time ×
/// device, oldest first). Device `d` is predicted to transmit iff at least
/// one incoming edge `s -> d` with lag `l` fired (`s` transmitted `l` steps
/// before the next step) and the strength-weighted mean trigger
/// probability of the fired edges is at least 0.5.
pub fn predict_next(history: ArrayView2<u8>, graph: &CausalGraph) -> Result<Vec<u8>> {
    let depth = graph.max_lag();
    if history.nrows() < depth {
        return Err(Error::arg(format!("history of {} rows, graph needs {depth}", history.nrows())));
    }
    if history.ncols() != graph.device_ids.len() {
        return Err(Error::shape(format!(
            "history has {} devices, graph {}",
            history.ncols(),
            graph.device_ids.len()
        )));
    }
    let idx = |id: &str| graph.device_ids.iter().position(|d| d == id).expect("validated device id");
    let now = history.nrows();
    let mut num = vec![0.0; history.ncols()];
    let mut den = vec![0.0; history.ncols()];
    for e in &graph.edges {
        if history[[now - e.lag, idx(&e.source)]] == 1 {
            let d = idx(&e.target);
            num[d] += e.strength * e.trigger_prob;
            den[d] += e.strength;
        }
    }
    Ok(num
        .iter()
        .zip(&den)
        .map(|(&n, &w)| (w > 0.0 && n / w >= 0.5) as u8)
        .collect())
}

/// [`predict_next`] for every step `t >= start` of `data`, using rows
/// before `t` as history. Row `i` of the result predicts step `start + i`.
pub fn predict_series(data: ArrayView2<u8>, graph: &CausalGraph, start: usize) -> Result<ndarray::Array2<u8>> {
    if start < graph.max_lag() || start > data.nrows() {
        return Err(Error::arg(format!("start {start} outside [{}, {}]", graph.max_lag(), data.nrows())));
    }
    let mut out = ndarray::Array2::zeros((data.nrows() - start, data.ncols()));
    for t in start..data.nrows() {
        let row = predict_next(data.slice(ndarray::s![..t, ..]), graph)?;
        out.row_mut(t - start).assign(&ndarray::Array1::from(row));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::traffic::{generate_record, paper_scenario};
    use ndarray::{array, Array2};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn coins(n: usize, seed: u64) -> Vec<u8> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.gen_bool(0.5) as u8).collect()
    }

    #[test]
    fn copy_has_positive_information() {
        let x = coins(1000, 1);
        assert!(directed_information(&x, &x, 1).unwrap() > 0.5);
    }

    #[test]
    fn independent_coins_near_zero() {
        let x = coins(100_000, 2);
        let y = coins(100_000, 3);
        let v = directed_information(&x, &y, 2).unwrap();
        assert!((0.0..0.01).contains(&v), "{v}");
    }

    #[test]
    fn preconditions() {
        let x = coins(100, 4);
        assert!(matches!(directed_information(&x, &x[..99], 1), Err(Error::Argument(_))));
        assert!(matches!(directed_information(&x, &x, 3), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn delayed_chain_is_asymmetric() {
        let n = 100_000;
        let y = coins(n, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut t = vec![0u8; n];
        for i in 2..n {
            t[i] = (y[i - 2] == 1 && rng.gen_bool(0.7)) as u8;
        }
        let fwd = directed_information(&y, &t, 3).unwrap();
        let back = directed_information(&t, &y, 3).unwrap();
        assert!(fwd >= 5.0 * back, "{fwd} vs {back}");
    }

    #[test]
    fn recovers_scenario_graph() {
        let rec = generate_record(&paper_scenario(), 10_000, 9).unwrap();
        let g = infer_causal_graph(&rec, DEFAULT_MAX_LAG, DEFAULT_ORDER, DEFAULT_THRESHOLD).unwrap();
        for (s, t, lag) in [("T", "W", 1), ("X", "Z", 3), ("Y", "T", 2)] {
            assert!(g.edges.iter().any(|e| e.source == s && e.target == t && e.lag == lag), "{s}->{t}");
        }
        assert!(!g.has_edge("Y", "W"), "indirect edge survives pruning");

        let none = infer_causal_graph(&rec, DEFAULT_MAX_LAG, DEFAULT_ORDER, f64::INFINITY).unwrap();
        assert!(none.edges.is_empty());
    }

    #[test]
    fn silent_record_has_no_edges() {
        let rec = TransmissionRecord::new(Array2::zeros((1200, 3)), 12, vec!["a".into(), "b".into(), "c".into()]).unwrap();
        let g = infer_causal_graph(&rec, 3, 2, DEFAULT_THRESHOLD).unwrap();
        assert!(g.edges.is_empty());
        assert_eq!(predict_next(rec.data.view(), &g).unwrap(), vec![0, 0, 0]);
    }

    #[test]
    fn deterministic_edge_prediction() {
        let g = CausalGraph {
            device_ids: vec!["T".into(), "W".into()],
            order: 3,
            threshold: 0.02,
            edges: vec![Edge {
                source: "T".into(),
                target: "W".into(),
                lag: 1,
                strength: 0.3,
                trigger_prob: 1.0,
            }],
        };
        assert_eq!(predict_next(array![[0u8, 0], [1, 0]].view(), &g).unwrap(), vec![0, 1]);
        assert_eq!(predict_next(array![[1u8, 0], [0, 1]].view(), &g).unwrap(), vec![0, 0]);
        assert!(predict_next(Array2::<u8>::zeros((0, 2)).view(), &g).is_err());
        let series = predict_series(array![[1u8, 0], [0, 1], [1, 0]].view(), &g, 1).unwrap();
        assert_eq!(series, array![[0u8, 1], [0, 0]]);
    }

    #[test]
    fn calibrated_threshold_isolates_true_edges() {
        let rec = generate_record(&paper_scenario(), 2000, 1).unwrap();
        let thr = calibrate_threshold(&rec, 3, 2, 0.99, 4).unwrap();
        assert!(thr > 0.0 && thr < 0.3, "{thr}");
        let g = infer_causal_graph(&rec, DEFAULT_MAX_LAG, 3, thr).unwrap();
        assert_eq!(g.edges.len(), 3, "{:?}", g.edges);
    }
}
