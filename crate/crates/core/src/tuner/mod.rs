//! Bayesian hyper-parameter optimization.
//!
//! The first `initial_random` trials are space-filling random draws (each
//! one the maximin pick among `candidates` uniform samples). After that a
//! Gaussian process is fitted to the encoded history and the candidate with
//! the highest expected improvement over the incumbent is proposed.
//! Candidates are half uniform samples and half Gaussian perturbations of
//! the incumbent.
//!
//! Seeds: trial `i` trains with `seed::derive(master, TRIAL, i)` and its
//! suggestion draws from `seed::rng(master, SUGGEST, i)`. Sequential runs
//! are fully reproducible; a run with budget `b` is a prefix of any longer
//! run with the same master seed.

pub mod gp;
mod space;

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use space::{HyperParams, IntRange, RealRange, SearchSpace, ENCODED_DIM};

use crate::dataset::{split, WindowedDataset};
use crate::error::{Error, Result};
use crate::lstm::{binary_accuracy, train, LstmModel};
use crate::seed::{self, stream};
use gp::{expected_improvement, GaussianProcess};

/// Box–Muller on top of uniform draws.
fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub index: usize,
    pub hyperparams: HyperParams,
    /// Validation binary accuracy; `None` when training failed.
    pub objective: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub wall_time_s: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuggestOptions {
    pub initial_random: usize,
    pub candidates: usize,
    /// Exploration margin of expected improvement, in objective units.
    pub xi: f64,
}

impl Default for SuggestOptions {
    fn default() -> Self {
        Self {
            initial_random: 5,
            candidates: 512,
            xi: 0.001,
        }
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Proposes the next point to evaluate given the trials so far.
pub fn suggest<R: Rng + ?Sized>(history: &[TrialResult], space: &SearchSpace, rng: &mut R, opts: &SuggestOptions) -> HyperParams {
    let completed: Vec<(&HyperParams, f64)> = history
        .iter()
        .filter_map(|t| t.objective.map(|o| (&t.hyperparams, o)))
        .collect();
    let seen: Vec<Vec<f64>> = history.iter().map(|t| space.encode(&t.hyperparams)).collect();
    let n_cand = opts.candidates.max(1);

    if completed.len() < opts.initial_random || seen.is_empty() {
        if seen.is_empty() {
            return space.sample(rng);
        }
        // maximin: farthest from everything already tried
        return (0..n_cand)
            .map(|_| space.sample(rng))
            .map(|hp| {
                let d = seen.iter().map(|s| sq_dist(s, &space.encode(&hp))).fold(f64::INFINITY, f64::min);
                (hp, d)
            })
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(hp, _)| hp)
            .expect("at least one candidate");
    }

    let x: Vec<Vec<f64>> = completed.iter().map(|(hp, _)| space.encode(hp)).collect();
    let y: Vec<f64> = completed.iter().map(|(_, o)| *o).collect();
    let degenerate = x.iter().all(|p| sq_dist(p, &x[0]) == 0.0);
    let gp = if degenerate { None } else { GaussianProcess::fit(&x, &y) };
    let Some(gp) = gp else {
        return space.sample(rng);
    };

    let (best_idx, incumbent) = y
        .iter()
        .copied()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .expect("non-empty");
    let anchor = x[best_idx].clone();
    let mut best: Option<(HyperParams, f64)> = None;
    for c in 0..n_cand {
        let hp = if c % 2 == 0 {
            space.sample(rng)
        } else {
            let scale = 0.15;
            let u: Vec<f64> = anchor.iter().map(|a| a + scale * standard_normal(rng)).collect();
            space.decode(&u)
        };
        let (mean, sd) = gp.predict(&space.encode(&hp));
        let ei = expected_improvement(mean, sd, incumbent, opts.xi);
        if best.as_ref().is_none_or(|(_, b)| ei > *b) {
            best = Some((hp, ei));
        }
    }
    best.expect("at least one candidate").0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuneOptions {
    pub budget: usize,
    pub seed: u64,
    pub suggest: SuggestOptions,
    /// Share of the training windows (taken from the end) used for scoring.
    pub validation_fraction: f64,
    /// Trials evaluated concurrently; 1 is fully deterministic.
    pub jobs: usize,
}

impl Default for TuneOptions {
    fn default() -> Self {
        Self {
            budget: 50,
            seed: 0,
            suggest: SuggestOptions::default(),
            validation_fraction: 0.2,
            jobs: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuneOutcome {
    pub best: TrialResult,
    pub log: Vec<TrialResult>,
}

impl TuneOutcome {
    /// Best objective among the first `n` trials.
    pub fn best_within(&self, n: usize) -> Option<f64> {
        self.log.iter().take(n).filter_map(|t| t.objective).max_by(f64::total_cmp)
    }
}

/// Trains a fresh model with `hp` and returns binary accuracy on `val`.
pub fn evaluate_trial(hp: &HyperParams, train_ds: &WindowedDataset, val: &WindowedDataset, trial_seed: u64) -> Result<f64> {
    let model = LstmModel::init(&hp.layer_sizes(), hp.dropout, train_ds.num_devices(), trial_seed)?;
    let (model, _) = train(model, train_ds, &hp.train_config(trial_seed))?;
    let pred = model.predict(val.inputs.view())?;
    if pred.iter().any(|p| !p.is_finite()) {
        return Err(Error::Numeric("non-finite validation predictions".into()));
    }
    binary_accuracy(pred.view(), val.labels.view(), 0.5)
}

/// Tunes the LSTM on `dataset` (the training partition). The chronological
/// tail of `validation_fraction` scores each trial.
pub fn tune(space: &SearchSpace, dataset: &WindowedDataset, opts: &TuneOptions) -> Result<TuneOutcome> {
    let (train_ds, val) = split(dataset, 1.0 - opts.validation_fraction)?;
    tune_with(space, opts, |hp, trial_seed| evaluate_trial(hp, &train_ds, &val, trial_seed))
}

/// Bayesian optimization of an arbitrary objective `f(hp, trial_seed)`.
pub fn tune_with<F>(space: &SearchSpace, opts: &TuneOptions, objective: F) -> Result<TuneOutcome>
where
    F: Fn(&HyperParams, u64) -> Result<f64> + Sync,
{
    space.validate()?;
    if opts.budget == 0 {
        return Err(Error::arg("tuning budget must be at least 1"));
    }
    let jobs = opts.jobs.max(1);
    let pool = (jobs > 1)
        .then(|| rayon::ThreadPoolBuilder::new().num_threads(jobs).build())
        .transpose()
        .map_err(|e| Error::Tuning(e.to_string()))?;

    let run = |index: usize, hp: HyperParams| -> TrialResult {
        let trial_seed = seed::derive(opts.seed, stream::TRIAL, index as u64);
        let started = Instant::now();
        let result = objective(&hp, trial_seed);
        let (objective, error) = match result {
            Ok(v) if v.is_finite() => (Some(v), None),
            Ok(v) => (None, Some(format!("non-finite objective {v}"))),
            Err(e) => (None, Some(e.to_string())),
        };
        TrialResult {
            index,
            hyperparams: hp,
            objective,
            error,
            wall_time_s: started.elapsed().as_secs_f64(),
            seed: trial_seed,
        }
    };

    let mut log: Vec<TrialResult> = Vec::with_capacity(opts.budget);
    while log.len() < opts.budget {
        let start = log.len();
        let batch = jobs.min(opts.budget - start);
        // Pending points enter the history with the incumbent value so a
        // batch spreads out instead of repeating one proposal.
        let mut pending = log.clone();
        let mut proposals = Vec::with_capacity(batch);
        for index in start..start + batch {
            let mut rng = seed::rng(opts.seed, stream::SUGGEST, index as u64);
            let hp = suggest(&pending, space, &mut rng, &opts.suggest);
            let lie = pending.iter().filter_map(|t| t.objective).max_by(f64::total_cmp);
            pending.push(TrialResult {
                index,
                hyperparams: hp.clone(),
                objective: lie,
                error: None,
                wall_time_s: 0.0,
                seed: 0,
            });
            proposals.push((index, hp));
        }
        let results: Vec<TrialResult> = match &pool {
            Some(pool) => pool.install(|| proposals.into_par_iter().map(|(i, hp)| run(i, hp)).collect()),
            None => proposals.into_iter().map(|(i, hp)| run(i, hp)).collect(),
        };
        log.extend(results);
    }

    let best = log
        .iter()
        .filter(|t| t.objective.is_some())
        .max_by(|a, b| a.objective.unwrap().total_cmp(&b.objective.unwrap()).then(b.index.cmp(&a.index)))
        .cloned()
        .ok_or_else(|| {
            let first = log.iter().find_map(|t| t.error.clone()).unwrap_or_default();
            Error::Tuning(format!("all {} trials failed; first error: {first}", log.len()))
        })?;
    Ok(TuneOutcome { best, log })
}

/// JSON-lines, one trial per line.
pub fn write_trial_log(log: &[TrialResult], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = Vec::new();
    for t in log {
        serde_json::to_writer(&mut out, t)?;
        out.push(b'\n');
    }
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(&out))
        .map_err(|e| Error::io(path, e))
}

pub fn read_trial_log(path: impl AsRef<Path>) -> Result<Vec<TrialResult>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(|e| Error::data(path, e.to_string())))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub seq_len: usize,
    pub best_objective: Option<f64>,
    pub best: Option<TrialResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Tunes once per sequence length on the dataset `build(len)` returns.
/// Failures become rows with an error and no objective.
pub fn sweep_sequence_length<B>(lengths: &[usize], space: &SearchSpace, build: B, opts: &TuneOptions) -> Vec<SweepRow>
where
    B: Fn(usize) -> Result<WindowedDataset>,
{
    lengths
        .iter()
        .map(|&len| match build(len).and_then(|ds| tune(space, &ds, opts)) {
            Ok(out) => SweepRow {
                seq_len: len,
                best_objective: out.best.objective,
                best: Some(out.best),
                error: None,
            },
            Err(e) => SweepRow {
                seq_len: len,
                best_objective: None,
                best: None,
                error: Some(e.to_string()),
            },
        })
        .collect()
}

/// `sequence_length,best_binary_accuracy`; failed lengths leave the value empty.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("sequence_length,best_binary_accuracy\n");
    for r in rows {
        match r.best_objective {
            Some(v) => out.push_str(&format!("{},{v:.12}\n", r.seq_len)),
            None => out.push_str(&format!("{},\n", r.seq_len)),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn lr_space() -> SearchSpace {
        let mut s = SearchSpace::pinned(&HyperParams::paper_best());
        s.learning_rate = SearchSpace::paper().learning_rate;
        s
    }

    fn quad(hp: &HyperParams) -> f64 {
        -(hp.learning_rate.log10() - 0.01f64.log10()).powi(2)
    }

    #[test]
    fn empty_history_draw_is_in_range() {
        let space = SearchSpace::paper();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..50 {
            assert!(space.contains(&suggest(&[], &space, &mut rng, &SuggestOptions::default())));
        }
    }

    #[test]
    fn degenerate_history_falls_back_to_random() {
        let space = SearchSpace::paper();
        let hp = HyperParams::paper_best();
        let history: Vec<TrialResult> = (0..8)
            .map(|i| TrialResult {
                index: i,
                hyperparams: hp.clone(),
                objective: Some(0.5),
                error: None,
                wall_time_s: 0.0,
                seed: 0,
            })
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s = suggest(&history, &space, &mut rng, &SuggestOptions::default());
        assert!(space.contains(&s));
    }

    #[test]
    fn budget_one_and_failures() {
        let space = lr_space();
        let opts = TuneOptions { budget: 1, seed: 3, ..Default::default() };
        let out = tune_with(&space, &opts, |hp, _| Ok(quad(hp))).unwrap();
        assert_eq!(out.log.len(), 1);
        assert_eq!(out.best, out.log[0]);

        let opts = TuneOptions { budget: 4, ..opts };
        let out = tune_with(&space, &opts, |hp, _| {
            if hp.learning_rate > 0.01 {
                Err(Error::Numeric("boom".into()))
            } else {
                Ok(quad(hp))
            }
        });
        if let Ok(out) = out {
            assert!(out.best.objective.is_some());
            assert!(out.log.iter().any(|t| t.objective.is_none()) || out.log.iter().all(|t| t.hyperparams.learning_rate <= 0.01));
        }
        let all_fail = tune_with(&space, &opts, |_, _| Err(Error::Numeric("boom".into())));
        assert!(matches!(all_fail, Err(Error::Tuning(_))));
        assert!(tune_with(&space, &TuneOptions { budget: 0, ..Default::default() }, |_, _| Ok(0.0)).is_err());
    }

    #[test]
    fn prefix_property() {
        let space = lr_space();
        let short = tune_with(&space, &TuneOptions { budget: 8, seed: 11, ..Default::default() }, |hp, _| Ok(quad(hp))).unwrap();
        let long = tune_with(&space, &TuneOptions { budget: 14, seed: 11, ..Default::default() }, |hp, _| Ok(quad(hp))).unwrap();
        for (a, b) in short.log.iter().zip(&long.log) {
            assert_eq!(a.hyperparams, b.hyperparams);
            assert_eq!(a.seed, b.seed);
        }
        let mut prev = f64::NEG_INFINITY;
        for n in 1..=14 {
            let b = long.best_within(n).unwrap();
            assert!(b >= prev);
            prev = b;
        }
    }

    #[test]
    fn concurrent_trials_share_seeds() {
        let space = lr_space();
        let seq = tune_with(&space, &TuneOptions { budget: 6, seed: 2, ..Default::default() }, |hp, _| Ok(quad(hp))).unwrap();
        let par = tune_with(&space, &TuneOptions { budget: 6, seed: 2, jobs: 3, ..Default::default() }, |hp, _| Ok(quad(hp))).unwrap();
        let seeds = |o: &TuneOutcome| o.log.iter().map(|t| t.seed).collect::<Vec<_>>();
        assert_eq!(seeds(&seq), seeds(&par));
    }

    #[test]
    fn trial_log_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let space = lr_space();
        let out = tune_with(&space, &TuneOptions { budget: 3, seed: 1, ..Default::default() }, |hp, _| Ok(quad(hp))).unwrap();
        let p = dir.path().join("log.jsonl");
        write_trial_log(&out.log, &p).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap().lines().count(), 3);
        assert_eq!(read_trial_log(&p).unwrap(), out.log);
    }

    #[test]
    fn sweep_rows_and_gaps() {
        let rows = vec![
            SweepRow { seq_len: 4, best_objective: Some(0.8), best: None, error: None },
            SweepRow { seq_len: 8, best_objective: None, best: None, error: Some("x".into()) },
        ];
        assert_eq!(sweep_csv(&rows), "sequence_length,best_binary_accuracy\n4,0.800000000000\n8,\n");
    }
}
