//! Synthetic event-driven MTC traffic.
//!
//! A [`NetworkSpec`] declares how each machine-type device behaves inside one
//! event of `event_len` time steps. Devices are periodic (may transmit only
//! at a fixed set of slots), i.i.d. random, or triggered by another device's
//! transmission a fixed number of steps earlier. Records are built by
//! concatenating independent events.
//!
//! Randomness: event `k` of a record generated with seed `s` draws from
//! `seed::rng(s, stream::EVENT, k)`. Inside an event, devices are visited in
//! spec order (stable-topologically adjusted so a trigger source is always
//! generated before its children; for specs listing sources first this is
//! exactly spec order) and slots in ascending order. Each draw is one
//! `f64` in `[0, 1)` compared against the probability:
//!
//! * periodic devices draw once per allowed slot;
//! * random devices draw once per slot;
//! * triggered devices draw once per source transmission, even when the
//!   triggered slot falls past the event boundary (the trigger is then
//!   dropped).

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs::File;
use std::path::Path;

use ndarray::{s, Array2, ArrayView1};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::{self, stream};

/// Generative rule for a single device.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum DeviceBehavior {
    /// Transmits independently with `p_transmit` at each allowed slot and
    /// sleeps elsewhere. Slots are 0-indexed.
    PeriodicSlots {
        allowed_slots: BTreeSet<usize>,
        p_transmit: f64,
    },
    IidRandom {
        p_transmit: f64,
    },
    /// Transmits `lag` steps after each transmission of `source`, with
    /// probability `p_trigger` per source transmission.
    Triggered {
        source: String,
        lag: usize,
        p_trigger: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Device {
    pub id: String,
    pub behavior: DeviceBehavior,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub event_len: usize,
    pub devices: Vec<Device>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rule {
    EmptyNetwork,
    EventLength,
    DuplicateId,
    ProbabilityRange,
    SlotRange,
    Lag,
    UnknownSource,
    Cycle,
    /// Every trigger chain reaching the device lands past the event end.
    Unreachable,
}

/// One broken invariant, naming the device it concerns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub device: Option<String>,
    pub rule: Rule,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.device {
            Some(d) => write!(f, "{d}: {:?}: {}", self.rule, self.detail),
            None => write!(f, "{:?}: {}", self.rule, self.detail),
        }
    }
}

/// The five-device scenario with X and Y transmitting with probability 0.5.
pub fn paper_scenario() -> NetworkSpec {
    paper_scenario_with(0.5, 0.5)
}

/// X periodic on slots {3,4,5,6,9,10} (1-indexed), Y random, Z follows X
/// after 3 steps with p 0.7, T follows Y after 2 steps with p 0.7 and W
/// follows T after 1 step with certainty.
pub fn paper_scenario_with(p_x: f64, p_y: f64) -> NetworkSpec {
    let triggered = |id: &str, source: &str, lag: usize, p: f64| Device {
        id: id.to_string(),
        behavior: DeviceBehavior::Triggered {
            source: source.to_string(),
            lag,
            p_trigger: p,
        },
    };
    NetworkSpec {
        event_len: 12,
        devices: vec![
            Device {
                id: "X".into(),
                behavior: DeviceBehavior::PeriodicSlots {
                    allowed_slots: [2, 3, 4, 5, 8, 9].into_iter().collect(),
                    p_transmit: p_x,
                },
            },
            Device {
                id: "Y".into(),
                behavior: DeviceBehavior::IidRandom { p_transmit: p_y },
            },
            triggered("Z", "X", 3, 0.7),
            triggered("T", "Y", 2, 0.7),
            triggered("W", "T", 1, 1.0),
        ],
    }
}

impl NetworkSpec {
    pub fn num_devices(&self) -> usize {
        self.devices.len()
    }

    pub fn device_ids(&self) -> Vec<String> {
        self.devices.iter().map(|d| d.id.clone()).collect()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.devices.iter().position(|d| d.id == id)
    }

    /// Trigger edges as (source index, child index, lag).
    pub fn dependency_edges(&self) -> Vec<(usize, usize, usize)> {
        self.devices
            .iter()
            .enumerate()
            .filter_map(|(child, d)| match &d.behavior {
                DeviceBehavior::Triggered { source, lag, .. } => {
                    self.index_of(source).map(|s| (s, child, *lag))
                }
                _ => None,
            })
            .collect()
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::data(path, e.to_string()))
    }

    /// Stable topological order: among ready devices, spec order wins.
    /// `None` when the trigger graph has a cycle or dangling source.
    fn generation_order(&self) -> Option<Vec<usize>> {
        let n = self.devices.len();
        let mut indegree = vec![0usize; n];
        let mut children = vec![Vec::new(); n];
        for (s, c, _) in self.dependency_edges() {
            indegree[c] += 1;
            children[s].push(c);
        }
        let mut ready: BTreeSet<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(i) = ready.pop_first() {
            order.push(i);
            for &c in &children[i] {
                indegree[c] -= 1;
                if indegree[c] == 0 {
                    ready.insert(c);
                }
            }
        }
        (order.len() == n).then_some(order)
    }
}

/// Checks every spec invariant. Never fails; an empty list means valid.
pub fn validate_spec(spec: &NetworkSpec) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |device: Option<&str>, rule, detail: String| {
        out.push(Violation {
            device: device.map(str::to_string),
            rule,
            detail,
        })
    };

    if spec.devices.is_empty() {
        push(None, Rule::EmptyNetwork, "no devices declared".into());
    }
    if spec.event_len == 0 {
        push(None, Rule::EventLength, "event_len must be at least 1".into());
    }

    let mut seen = HashMap::new();
    for d in &spec.devices {
        *seen.entry(d.id.as_str()).or_insert(0usize) += 1;
    }
    for (id, count) in seen.iter().filter(|(_, &c)| c > 1) {
        push(Some(id), Rule::DuplicateId, format!("id declared {count} times"));
    }

    let prob_ok = |p: f64| (0.0..=1.0).contains(&p);
    for d in &spec.devices {
        let id = Some(d.id.as_str());
        match &d.behavior {
            DeviceBehavior::PeriodicSlots {
                allowed_slots,
                p_transmit,
            } => {
                if !prob_ok(*p_transmit) {
                    push(id, Rule::ProbabilityRange, format!("p_transmit = {p_transmit}"));
                }
                if let Some(bad) = allowed_slots.iter().find(|&&s| s >= spec.event_len) {
                    push(
                        id,
                        Rule::SlotRange,
                        format!("slot {bad} outside [0, {})", spec.event_len),
                    );
                }
            }
            DeviceBehavior::IidRandom { p_transmit } => {
                if !prob_ok(*p_transmit) {
                    push(id, Rule::ProbabilityRange, format!("p_transmit = {p_transmit}"));
                }
            }
            DeviceBehavior::Triggered {
                source,
                lag,
                p_trigger,
            } => {
                if !prob_ok(*p_trigger) {
                    push(id, Rule::ProbabilityRange, format!("p_trigger = {p_trigger}"));
                }
                if *lag == 0 {
                    push(id, Rule::Lag, "lag must be at least 1".into());
                }
                if spec.index_of(source).is_none() {
                    push(id, Rule::UnknownSource, format!("source {source} not declared"));
                }
            }
        }
    }

    // Cycles: devices left over after peeling the DAG.
    if spec.generation_order().is_none() {
        let known: Vec<_> = spec.dependency_edges();
        let n = spec.devices.len();
        let mut indegree = vec![0usize; n];
        for &(_, c, _) in &known {
            indegree[c] += 1;
        }
        let mut removed = vec![false; n];
        while let Some(i) = (0..n).find(|&i| !removed[i] && indegree[i] == 0) {
            removed[i] = true;
            for &(s, c, _) in &known {
                if s == i {
                    indegree[c] -= 1;
                }
            }
        }
        let cyclic: Vec<&str> = (0..n)
            .filter(|&i| !removed[i])
            .map(|i| spec.devices[i].id.as_str())
            .collect();
        if !cyclic.is_empty() {
            push(
                Some(&cyclic.join(",")),
                Rule::Cycle,
                format!("trigger dependencies form a cycle through {}", cyclic.join(" -> ")),
            );
        }
    }

    // Earliest slot at which each device can transmit; only meaningful for DAGs.
    if out.is_empty() {
        let order = spec.generation_order().expect("validated DAG");
        let mut earliest: Vec<Option<usize>> = vec![None; spec.devices.len()];
        for &i in &order {
            earliest[i] = match &spec.devices[i].behavior {
                DeviceBehavior::PeriodicSlots { allowed_slots, .. } => {
                    allowed_slots.first().copied()
                }
                DeviceBehavior::IidRandom { .. } => Some(0),
                DeviceBehavior::Triggered { source, lag, .. } => {
                    let s = spec.index_of(source).expect("validated source");
                    earliest[s].map(|e| e + lag)
                }
            };
        }
        for (i, d) in spec.devices.iter().enumerate() {
            if let DeviceBehavior::Triggered { .. } = d.behavior {
                if earliest[i].is_none_or(|e| e >= spec.event_len) {
                    out.push(Violation {
                        device: Some(d.id.clone()),
                        rule: Rule::Unreachable,
                        detail: format!(
                            "every trigger chain lands past event_len {}",
                            spec.event_len
                        ),
                    });
                }
            }
        }
    }
    out
}

fn ensure_valid(spec: &NetworkSpec) -> Result<Vec<usize>> {
    let violations = validate_spec(spec);
    if !violations.is_empty() {
        return Err(Error::Spec(violations.iter().map(|v| v.to_string()).collect()));
    }
    Ok(spec.generation_order().expect("valid spec is a DAG"))
}

/// One event as an `event_len × num_devices` 0/1 matrix.
pub fn generate_event<R: Rng + ?Sized>(spec: &NetworkSpec, rng: &mut R) -> Result<Array2<u8>> {
    let order = ensure_valid(spec)?;
    Ok(event_unchecked(spec, &order, rng))
}

fn event_unchecked<R: Rng + ?Sized>(spec: &NetworkSpec, order: &[usize], rng: &mut R) -> Array2<u8> {
    let len = spec.event_len;
    let mut ev = Array2::<u8>::zeros((len, spec.devices.len()));
    for &dev in order {
        match &spec.devices[dev].behavior {
            DeviceBehavior::PeriodicSlots {
                allowed_slots,
                p_transmit,
            } => {
                for &slot in allowed_slots {
                    if rng.gen::<f64>() < *p_transmit {
                        ev[[slot, dev]] = 1;
                    }
                }
            }
            DeviceBehavior::IidRandom { p_transmit } => {
                for slot in 0..len {
                    if rng.gen::<f64>() < *p_transmit {
                        ev[[slot, dev]] = 1;
                    }
                }
            }
            DeviceBehavior::Triggered {
                source,
                lag,
                p_trigger,
            } => {
                let src = spec.index_of(source).expect("validated source");
                for slot in 0..len {
                    if ev[[slot, src]] == 1 && rng.gen::<f64>() < *p_trigger && slot + lag < len {
                        ev[[slot + lag, dev]] = 1;
                    }
                }
            }
        }
    }
    ev
}

/// Binary transmission history: one row per time step, one column per device.
#[derive(Clone, Debug, PartialEq)]
pub struct TransmissionRecord {
    pub data: Array2<u8>,
    pub event_len: usize,
    pub device_ids: Vec<String>,
}

/// Metadata written next to a record CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecordSidecar {
    pub event_len: usize,
    pub num_events: usize,
    pub seed: u64,
    pub spec: NetworkSpec,
}

/// Concatenates `num_events` independent events. Event `k` depends only on
/// `(spec, seed, k)`.
pub fn generate_record(spec: &NetworkSpec, num_events: usize, seed: u64) -> Result<TransmissionRecord> {
    if num_events == 0 {
        return Err(Error::arg("num_events must be at least 1"));
    }
    let order = ensure_valid(spec)?;
    let len = spec.event_len;
    let mut data = Array2::<u8>::zeros((num_events * len, spec.num_devices()));
    for k in 0..num_events {
        let mut rng = seed::rng(seed, stream::EVENT, k as u64);
        let ev = event_unchecked(spec, &order, &mut rng);
        data.slice_mut(s![k * len..(k + 1) * len, ..]).assign(&ev);
    }
    Ok(TransmissionRecord {
        data,
        event_len: len,
        device_ids: spec.device_ids(),
    })
}

impl TransmissionRecord {
    pub fn new(data: Array2<u8>, event_len: usize, device_ids: Vec<String>) -> Result<Self> {
        if event_len == 0 || !data.nrows().is_multiple_of(event_len) {
            return Err(Error::arg(format!(
                "{} steps is not a multiple of event_len {event_len}",
                data.nrows()
            )));
        }
        if device_ids.len() != data.ncols() {
            return Err(Error::shape(format!(
                "{} device ids for {} columns",
                device_ids.len(),
                data.ncols()
            )));
        }
        if data.iter().any(|&v| v > 1) {
            return Err(Error::arg("record entries must be 0 or 1"));
        }
        Ok(Self {
            data,
            event_len,
            device_ids,
        })
    }

    pub fn total_steps(&self) -> usize {
        self.data.nrows()
    }

    pub fn num_devices(&self) -> usize {
        self.data.ncols()
    }

    pub fn num_events(&self) -> usize {
        self.total_steps() / self.event_len
    }

    pub fn column(&self, device: usize) -> ArrayView1<'_, u8> {
        self.data.column(device)
    }

    pub fn device_index(&self, id: &str) -> Option<usize> {
        self.device_ids.iter().position(|d| d == id)
    }

    /// Header of device ids, then one `0`/`1` row per time step.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity((self.total_steps() + 1) * 2 * self.num_devices());
        out.push_str(&self.device_ids.join(","));
        out.push('\n');
        for row in self.data.rows() {
            for (j, v) in row.iter().enumerate() {
                if j > 0 {
                    out.push(',');
                }
                out.push(if *v == 1 { '1' } else { '0' });
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: impl AsRef<Path>, event_len: usize) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut rdr = csv::Reader::from_reader(file);
        let device_ids: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let mut flat = Vec::new();
        let mut rows = 0;
        for rec in rdr.records() {
            let rec = rec?;
            if rec.len() != device_ids.len() {
                return Err(Error::data(path, format!("row {} has {} fields", rows + 1, rec.len())));
            }
            for field in rec.iter() {
                flat.push(match field.trim() {
                    "0" => 0u8,
                    "1" => 1u8,
                    other => {
                        return Err(Error::data(path, format!("non-binary entry {other:?} in row {}", rows + 1)))
                    }
                });
            }
            rows += 1;
        }
        let data = Array2::from_shape_vec((rows, device_ids.len()), flat)
            .map_err(|e| Error::data(path, e.to_string()))?;
        Self::new(data, event_len, device_ids).map_err(|e| Error::data(path, e.to_string()))
    }
}

impl RecordSidecar {
    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::data(path, e.to_string()))
    }
}

/// Empirical `P(child = 1 at t + lag | source = 1 at t)` restricted to
/// pairs inside one event.
pub fn conditional_trigger_frequency(record: &TransmissionRecord, source: usize, child: usize, lag: usize) -> Option<f64> {
    let len = record.event_len;
    let mut hits = 0usize;
    let mut total = 0usize;
    for t in 0..record.total_steps() {
        if t % len + lag >= len || record.data[[t, source]] == 0 {
            continue;
        }
        total += 1;
        hits += record.data[[t + lag, child]] as usize;
    }
    (total > 0).then(|| hits as f64 / total as f64)
}

/// Count of transmissions per (device, slot-within-event).
pub fn slot_histogram(record: &TransmissionRecord) -> BTreeMap<(usize, usize), usize> {
    let mut hist = BTreeMap::new();
    for ((t, d), &v) in record.data.indexed_iter() {
        if v == 1 {
            *hist.entry((d, t % record.event_len)).or_insert(0) += 1;
        }
    }
    hist
}
