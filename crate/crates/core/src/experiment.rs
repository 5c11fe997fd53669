//! End-to-end experiment orchestration: configuration, held-out splits,
//! artifact staging and reproducibility manifests.
//!
//! Every command computes all of its artifacts in memory first and writes
//! them only once nothing can fail any more, so an error never leaves a
//! partial output directory behind. Existing files are only replaced with
//! `force`. Artifacts are deterministic functions of the configuration and
//! inputs; the wall-clock timestamp lives in the manifest alone.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use ndarray::{s, Array2};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::{split, window, WindowedDataset};
use crate::di::{self, CausalGraph};
use crate::error::{Error, Result};
use crate::eval::{self, EvalReport};
use crate::grant::{self, GrantStats};
use crate::lstm::{train, Checkpoint, LstmModel, TrainHistory};
use crate::traffic::{generate_record, paper_scenario_with, NetworkSpec, RecordSidecar, TransmissionRecord};
use crate::tuner::{self, HyperParams, SearchSpace, SuggestOptions, TuneOptions};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TunerConfig {
    pub budget: usize,
    pub initial_random: usize,
    pub candidates: usize,
    pub validation_fraction: f64,
    pub jobs: usize,
    pub space: SearchSpace,
}

impl Default for TunerConfig {
    fn default() -> Self {
        let t = TuneOptions::default();
        Self {
            budget: t.budget,
            initial_random: t.suggest.initial_random,
            candidates: t.suggest.candidates,
            validation_fraction: t.validation_fraction,
            jobs: t.jobs,
            space: SearchSpace::paper(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiConfig {
    pub order: usize,
    pub max_lag: usize,
    pub threshold: f64,
    /// Replace `threshold` with a permutation-calibrated one.
    pub calibrate: bool,
    pub calibration_rounds: usize,
    pub calibration_quantile: f64,
}

impl Default for DiConfig {
    fn default() -> Self {
        Self {
            order: di::DEFAULT_ORDER,
            max_lag: di::DEFAULT_MAX_LAG,
            threshold: di::DEFAULT_THRESHOLD,
            calibrate: false,
            calibration_rounds: 2,
            calibration_quantile: 0.99,
        }
    }
}

/// Everything a run depends on. Missing JSON fields take these defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Network specification file; the built-in five-device scenario when absent.
    pub spec: Option<PathBuf>,
    pub p_x: f64,
    pub p_y: f64,
    pub num_events: usize,
    pub seed: u64,
    pub seq_len: usize,
    pub train_fraction: f64,
    pub decision_threshold: f64,
    pub hyperparams: HyperParams,
    pub tuner: TunerConfig,
    pub sweep_lengths: Vec<usize>,
    pub di: DiConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            spec: None,
            p_x: 0.5,
            p_y: 0.5,
            num_events: 2000,
            seed: 7,
            seq_len: 12,
            train_fraction: 0.8,
            decision_threshold: 0.5,
            hyperparams: HyperParams::paper_best(),
            tuner: TunerConfig::default(),
            sweep_lengths: (4..=24).step_by(2).collect(),
            di: DiConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::arg(format!("config {}: {e}", path.display())))
    }

    pub fn network_spec(&self) -> Result<NetworkSpec> {
        match &self.spec {
            Some(p) => NetworkSpec::from_json_file(p),
            None => Ok(paper_scenario_with(self.p_x, self.p_y)),
        }
    }

    pub fn tune_options(&self) -> TuneOptions {
        TuneOptions {
            budget: self.tuner.budget,
            seed: self.seed,
            suggest: SuggestOptions {
                initial_random: self.tuner.initial_random,
                candidates: self.tuner.candidates,
                ..SuggestOptions::default()
            },
            validation_fraction: self.tuner.validation_fraction,
            jobs: self.tuner.jobs,
        }
    }
}

/// A record windowed and split chronologically into train and test.
#[derive(Clone, Debug)]
pub struct Holdout {
    pub record: TransmissionRecord,
    pub train: WindowedDataset,
    pub test: WindowedDataset,
}

impl Holdout {
    pub fn new(record: TransmissionRecord, seq_len: usize, train_fraction: f64) -> Result<Self> {
        let ds = window(&record, seq_len, 1)?;
        let (train, test) = split(&ds, train_fraction)?;
        Ok(Self { record, train, test })
    }

    /// First record row that is a test label; every later row is one too.
    pub fn test_start(&self) -> usize {
        self.test.label_row(0)
    }

    /// Whole events preceding the first test label, the only rows a
    /// baseline may learn from.
    pub fn training_record(&self) -> Result<TransmissionRecord> {
        let len = self.record.event_len;
        let rows = self.test_start() / len * len;
        if rows == 0 {
            return Err(Error::InsufficientData("no complete event before the test partition".into()));
        }
        TransmissionRecord::new(
            self.record.data.slice(s![..rows, ..]).to_owned(),
            len,
            self.record.device_ids.clone(),
        )
    }

    pub fn test_labels(&self) -> Array2<u8> {
        self.test.binary_labels()
    }

    pub fn lstm_predictions(&self, model: &LstmModel, threshold: f64) -> Result<Array2<u8>> {
        Ok(model.predict(self.test.inputs.view())?.mapv(|p| (p >= threshold) as u8))
    }

    /// Infers the causal graph from the training rows.
    pub fn di_graph(&self, cfg: &DiConfig, seed: u64) -> Result<CausalGraph> {
        let rec = self.training_record()?;
        let threshold = if cfg.calibrate {
            di::calibrate_threshold(&rec, cfg.order, cfg.calibration_rounds, cfg.calibration_quantile, seed)?
        } else {
            cfg.threshold
        };
        di::infer_causal_graph(&rec, cfg.max_lag, cfg.order, threshold)
    }

    /// Graph predictions for every test label row.
    pub fn di_predictions(&self, graph: &CausalGraph) -> Result<Array2<u8>> {
        di::predict_series(self.record.data.view(), graph, self.test_start())
    }

    pub fn evaluate(&self, predictor: &str, dataset: &str, pred: &Array2<u8>) -> Result<EvalReport> {
        eval::evaluate(predictor, dataset, &self.record.device_ids, pred.view(), self.test_labels().view())
    }

    pub fn simulate(&self, pred: &Array2<u8>) -> Result<GrantStats> {
        grant::simulate_precomputed(&self.record, pred.view(), self.test_start())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Identifies the test partition of a record for report comparison.
pub fn dataset_id(record_sha: &str, seq_len: usize, train_fraction: f64) -> String {
    format!("record-{}:seq{seq_len}:train{train_fraction}:test", &record_sha[..16])
}

/// A loaded input file with its content hash.
#[derive(Clone, Debug)]
pub struct Input<T> {
    pub path: PathBuf,
    pub sha256: String,
    pub value: T,
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

/// Reads a record CSV. The event length comes from the `.json` sidecar
/// beside it when present, else from `event_len`.
pub fn load_record(path: impl AsRef<Path>, event_len: Option<usize>) -> Result<Input<TransmissionRecord>> {
    let path = path.as_ref();
    let bytes = read_bytes(path)?;
    let sidecar = path.with_extension("json");
    let len = match event_len {
        Some(l) => l,
        None if sidecar.exists() => RecordSidecar::read(&sidecar)?.event_len,
        None => 12,
    };
    Ok(Input {
        path: path.to_path_buf(),
        sha256: sha256_hex(&bytes),
        value: TransmissionRecord::read_csv(path, len)?,
    })
}

pub fn load_json<T: serde::de::DeserializeOwned>(path: impl AsRef<Path>) -> Result<Input<T>> {
    let path = path.as_ref();
    let bytes = read_bytes(path)?;
    let value = serde_json::from_slice(&bytes).map_err(|e| Error::data(path, e.to_string()))?;
    Ok(Input {
        path: path.to_path_buf(),
        sha256: sha256_hex(&bytes),
        value,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub argv: Vec<String>,
    pub config: ExperimentConfig,
    pub seeds: BTreeMap<String, u64>,
    /// Input path to SHA-256 of its contents.
    pub inputs: BTreeMap<String, String>,
    /// Output file name to SHA-256 of its contents.
    pub outputs: BTreeMap<String, String>,
    pub created_at: String,
}

/// Artifacts of one command, held in memory until [`commit`](Self::commit).
#[derive(Debug)]
pub struct Staged {
    pub command: String,
    pub files: Vec<(String, Vec<u8>)>,
    pub inputs: BTreeMap<String, String>,
    pub seeds: BTreeMap<String, u64>,
    /// Human-readable summary for the terminal.
    pub summary: String,
}

impl Staged {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            files: Vec::new(),
            inputs: BTreeMap::new(),
            seeds: BTreeMap::new(),
            summary: String::new(),
        }
    }

    pub fn file(&mut self, name: &str, bytes: impl Into<Vec<u8>>) {
        self.files.push((name.to_string(), bytes.into()));
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        self.file(name, serde_json::to_string_pretty(value)? + "\n");
        Ok(())
    }

    pub fn input<T>(&mut self, input: &Input<T>) {
        self.inputs.insert(input.path.display().to_string(), input.sha256.clone());
    }

    pub fn manifest_name(&self) -> String {
        format!("manifest_{}.json", self.command)
    }

    /// Writes every artifact plus the manifest into `dir`. Refuses to touch
    /// anything if one of the targets exists and `force` is off.
    pub fn commit(self, dir: &Path, force: bool, argv: &[String], config: &ExperimentConfig) -> Result<Manifest> {
        let manifest_name = self.manifest_name();
        let names = self.files.iter().map(|(n, _)| n.as_str()).chain([manifest_name.as_str()]);
        if !force {
            let existing: Vec<String> = names
                .filter(|n| dir.join(n).exists())
                .map(|n| dir.join(n).display().to_string())
                .collect();
            if !existing.is_empty() {
                return Err(Error::arg(format!(
                    "refusing to overwrite {} (pass --force)",
                    existing.join(", ")
                )));
            }
        }
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut outputs = BTreeMap::new();
        for (name, bytes) in &self.files {
            let path = dir.join(name);
            std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
            outputs.insert(name.clone(), sha256_hex(bytes));
        }
        let manifest = Manifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: self.command,
            argv: argv.to_vec(),
            config: config.clone(),
            seeds: self.seeds,
            inputs: self.inputs,
            outputs,
            created_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        };
        let path = dir.join(&manifest_name);
        std::fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n").map_err(|e| Error::io(&path, e))?;
        Ok(manifest)
    }
}

pub fn cmd_generate(cfg: &ExperimentConfig) -> Result<Staged> {
    let spec = cfg.network_spec()?;
    let record = generate_record(&spec, cfg.num_events, cfg.seed)?;
    let mut st = Staged::new("generate");
    if let Some(p) = &cfg.spec {
        st.inputs.insert(p.display().to_string(), sha256_hex(&read_bytes(p)?));
    }
    st.seeds.insert("master".into(), cfg.seed);
    st.file("record.csv", record.to_csv());
    st.json(
        "record.json",
        &RecordSidecar {
            event_len: spec.event_len,
            num_events: cfg.num_events,
            seed: cfg.seed,
            spec,
        },
    )?;
    st.summary = format!(
        "generated {} steps x {} devices",
        record.total_steps(),
        record.num_devices()
    );
    Ok(st)
}

pub fn cmd_train(cfg: &ExperimentConfig, record: &Input<TransmissionRecord>, hp: &HyperParams) -> Result<Staged> {
    let holdout = Holdout::new(record.value.clone(), cfg.seq_len, cfg.train_fraction)?;
    let model = LstmModel::init(&hp.layer_sizes(), hp.dropout, holdout.record.num_devices(), cfg.seed)?;
    let train_cfg = hp.train_config(cfg.seed);
    let (model, history) = train(model, &holdout.train, &train_cfg)?;
    let ck = Checkpoint::from_model(&model, cfg.seq_len, holdout.record.device_ids.clone(), Some(train_cfg));

    let mut st = Staged::new("train");
    st.input(record);
    st.seeds.insert("master".into(), cfg.seed);
    st.json("model.json", &ck)?;
    st.json("hyperparams.json", hp)?;
    st.file("history.csv", history.to_csv());
    st.summary = format!(
        "trained {} windows, final training accuracy {:.4}",
        holdout.train.len(),
        history.final_accuracy().unwrap_or(0.0)
    );
    Ok(st)
}

pub fn cmd_tune(cfg: &ExperimentConfig, record: &Input<TransmissionRecord>) -> Result<Staged> {
    let holdout = Holdout::new(record.value.clone(), cfg.seq_len, cfg.train_fraction)?;
    let out = tuner::tune(&cfg.tuner.space, &holdout.train, &cfg.tune_options())?;
    let mut st = Staged::new("tune");
    st.input(record);
    st.seeds.insert("master".into(), cfg.seed);
    let mut log = Vec::new();
    let mut curve = String::from("trial,objective,best_so_far\n");
    for (i, t) in out.log.iter().enumerate() {
        log.extend(serde_json::to_vec(&strip_time(t))?);
        log.push(b'\n');
        let obj = t.objective.map(|v| format!("{v:.12}")).unwrap_or_default();
        let best = out.best_within(i + 1).map(|v| format!("{v:.12}")).unwrap_or_default();
        curve.push_str(&format!("{},{obj},{best}\n", t.index));
    }
    st.file("tuning_log.jsonl", log);
    st.file("tuning_curve.csv", curve);
    st.json("best_hyperparams.json", &out.best.hyperparams)?;
    st.summary = format!(
        "best validation accuracy {:.4} at trial {}",
        out.best.objective.unwrap_or(0.0),
        out.best.index
    );
    Ok(st)
}

/// Wall time is the one nondeterministic trial field; artifacts omit it.
fn strip_time(t: &tuner::TrialResult) -> tuner::TrialResult {
    tuner::TrialResult {
        wall_time_s: 0.0,
        ..t.clone()
    }
}

pub fn cmd_sweep(cfg: &ExperimentConfig, record: &Input<TransmissionRecord>) -> Result<Staged> {
    let rows = tuner::sweep_sequence_length(
        &cfg.sweep_lengths,
        &cfg.tuner.space,
        |len| Holdout::new(record.value.clone(), len, cfg.train_fraction).map(|h| h.train),
        &cfg.tune_options(),
    );
    let rows: Vec<tuner::SweepRow> = rows
        .into_iter()
        .map(|r| tuner::SweepRow {
            best: r.best.as_ref().map(strip_time),
            ..r
        })
        .collect();
    let mut st = Staged::new("sweep");
    st.input(record);
    st.seeds.insert("master".into(), cfg.seed);
    st.file("sweep.csv", tuner::sweep_csv(&rows));
    st.json("sweep.json", &rows)?;
    st.summary = rows
        .iter()
        .map(|r| match r.best_objective {
            Some(v) => format!("seq_len {:>2}: {v:.4}", r.seq_len),
            None => format!("seq_len {:>2}: failed ({})", r.seq_len, r.error.as_deref().unwrap_or("")),
        })
        .collect::<Vec<_>>()
        .join("\n");
    Ok(st)
}

/// Which predictor an evaluation or simulation uses.
pub enum Predictor<'a> {
    Lstm(&'a Input<Checkpoint>),
    Di,
}

impl Predictor<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            Predictor::Lstm(_) => "lstm",
            Predictor::Di => "di",
        }
    }
}

/// Test-partition predictions of `predictor`, plus the inferred graph for
/// the DI baseline.
fn test_predictions(
    cfg: &ExperimentConfig,
    record: &Input<TransmissionRecord>,
    predictor: &Predictor,
    st: &mut Staged,
) -> Result<(Holdout, Array2<u8>, Option<CausalGraph>)> {
    st.input(record);
    match predictor {
        Predictor::Lstm(ck) => {
            st.input(*ck);
            if ck.value.device_ids != record.value.device_ids {
                return Err(Error::data(&ck.path, "checkpoint devices differ from the record's"));
            }
            let model = ck.value.to_model().map_err(|e| Error::data(&ck.path, e.to_string()))?;
            let holdout = Holdout::new(record.value.clone(), ck.value.seq_len, cfg.train_fraction)?;
            let pred = holdout.lstm_predictions(&model, cfg.decision_threshold)?;
            Ok((holdout, pred, None))
        }
        Predictor::Di => {
            st.seeds.insert("master".into(), cfg.seed);
            let holdout = Holdout::new(record.value.clone(), cfg.seq_len, cfg.train_fraction)?;
            let graph = holdout.di_graph(&cfg.di, cfg.seed)?;
            let pred = holdout.di_predictions(&graph)?;
            Ok((holdout, pred, Some(graph)))
        }
    }
}

pub fn cmd_evaluate(cfg: &ExperimentConfig, record: &Input<TransmissionRecord>, predictor: Predictor) -> Result<Staged> {
    let name = predictor.name();
    let mut st = Staged::new(&format!("evaluate_{name}"));
    let (holdout, pred, graph) = test_predictions(cfg, record, &predictor, &mut st)?;
    let dataset = dataset_id(&record.sha256, holdout.test.seq_len, cfg.train_fraction);
    let report = holdout.evaluate(name, &dataset, &pred)?;
    if let Some(g) = graph {
        st.json("graph.json", &g)?;
    }
    st.json(&format!("report_{name}.json"), &report)?;
    st.file(&format!("metrics_{name}.csv"), eval::metric_series_csv(std::slice::from_ref(&report)));
    let a = &report.aggregate.metrics;
    st.summary = format!(
        "{name}: sensitivity {:.4}  fdr {:.4}  accuracy {:.4}  mcc {:.4}",
        a.sensitivity, a.fdr, a.accuracy, a.mcc
    );
    Ok(st)
}

pub fn cmd_simulate(cfg: &ExperimentConfig, record: &Input<TransmissionRecord>, predictor: Predictor) -> Result<Staged> {
    let name = predictor.name();
    let mut st = Staged::new(&format!("simulate_{name}"));
    let (holdout, pred, _) = test_predictions(cfg, record, &predictor, &mut st)?;
    let stats = holdout.simulate(&pred)?;
    let report = grant::ra_reduction_report(name, &stats);
    st.json(&format!("grant_{name}.json"), &stats)?;
    st.file(&format!("grant_{name}.csv"), grant::reports_csv(std::slice::from_ref(&report)));
    st.summary = format!(
        "{name}: {} grants, {} wasted ({:.4}), RA requests {} of {} (reduction {:.4})",
        stats.grants_issued, stats.grants_wasted, stats.waste_fraction, stats.ra_requests, stats.ra_only_requests, stats.ra_reduction
    );
    Ok(st)
}

pub fn cmd_compare(reports: &[Input<EvalReport>]) -> Result<Staged> {
    let values: Vec<EvalReport> = reports.iter().map(|r| r.value.clone()).collect();
    let table = eval::compare(&values)?;
    let mut st = Staged::new("compare");
    for r in reports {
        st.input(r);
    }
    st.file("compare.csv", table.to_csv());
    st.json("compare.json", &table)?;
    st.file("metric_series.csv", eval::metric_series_csv(&values));
    st.summary = table
        .rows
        .iter()
        .filter(|r| r.scope == eval::AGGREGATE)
        .map(|r| {
            let deltas: Vec<String> = r.deltas.iter().map(|d| format!("{d:+.4}")).collect();
            format!("{:<12} {:.4}  {}", r.metric, r.baseline, deltas.join("  "))
        })
        .collect::<Vec<_>>()
        .join("\n");
    Ok(st)
}

/// Convenience for reading a history CSV back, e.g. when plotting.
pub fn read_history(path: impl AsRef<Path>) -> Result<TrainHistory> {
    let path = path.as_ref();
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::data(path, e.to_string()))?;
    let epochs = rdr
        .deserialize()
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::data(path, e.to_string()))?;
    Ok(TrainHistory { epochs })
}
