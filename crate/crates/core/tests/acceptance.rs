//! Acceptance criteria. Each test writes one `[PASS]`/`[FAIL]` line to
//! stderr (uncaptured) and then asserts the criterion.
//!
//! Run alone with `cargo test --test acceptance -- --test-threads 1`.

mod common;

use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::sync::OnceLock;
use std::time::Instant;

use mtc_traffic::di::{directed_information, infer_causal_graph};
use mtc_traffic::eval::{confusion, evaluate, metrics, ConfusionCounts, EvalReport};
use mtc_traffic::experiment::Holdout;
use mtc_traffic::grant::{simulate_precomputed, GrantStats};
use mtc_traffic::lstm::{train, LstmModel, TrainHistory};
use mtc_traffic::traffic::{generate_record, paper_scenario};
use mtc_traffic::tuner::{sweep_sequence_length, HyperParams, IntRange, SearchSpace, TuneOptions};
use ndarray::{s, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 7;
const EVENTS: usize = 2000;
const SEQ_LEN: usize = 12;
const TRAIN_FRACTION: f64 = 0.8;

fn report(id: u32, name: &str, pass: bool, detail: &str) {
    let tag = if pass { "PASS" } else { "FAIL" };
    let line = format!("[{tag}] criterion {id} ({name}): {detail}\n");
    // Direct handle writes bypass the test harness' output capture.
    let _ = std::io::stderr().write_all(line.as_bytes());
}

struct Shared {
    holdout: Holdout,
    history: TrainHistory,
    lstm_pred: Array2<u8>,
    lstm_report: EvalReport,
    train_seconds: f64,
}

/// The best known configuration trained once on the reference record.
fn shared() -> &'static Shared {
    static CELL: OnceLock<Shared> = OnceLock::new();
    CELL.get_or_init(|| {
        let record = generate_record(&paper_scenario(), EVENTS, SEED).unwrap();
        let holdout = Holdout::new(record, SEQ_LEN, TRAIN_FRACTION).unwrap();
        let hp = HyperParams::paper_best();
        let started = Instant::now();
        let model = LstmModel::init(&hp.layer_sizes(), hp.dropout, 5, SEED).unwrap();
        let (model, history) = train(model, &holdout.train, &hp.train_config(SEED)).unwrap();
        let train_seconds = started.elapsed().as_secs_f64();
        let lstm_pred = holdout.lstm_predictions(&model, 0.5).unwrap();
        let lstm_report = holdout.evaluate("lstm", "test", &lstm_pred).unwrap();
        Shared {
            holdout,
            history,
            lstm_pred,
            lstm_report,
            train_seconds,
        }
    })
}

#[test]
fn criterion_1_per_device_table() {
    let sh = shared();
    let m = |id: &str| sh.lstm_report.device(id).unwrap().metrics.clone();
    let (w, t, z, x, y) = (m("W"), m("T"), m("Z"), m("X"), m("Y"));
    let checks = [
        ("W accuracy >= 0.99", w.accuracy, w.accuracy >= 0.99),
        ("W mcc >= 0.99", w.mcc, w.mcc >= 0.99),
        ("T sensitivity >= 0.97", t.sensitivity, t.sensitivity >= 0.97),
        ("Z sensitivity >= 0.95", z.sensitivity, z.sensitivity >= 0.95),
        ("X accuracy >= 0.78", x.accuracy, x.accuracy >= 0.78),
        ("Y accuracy in [0.45, 0.58]", y.accuracy, (0.45..=0.58).contains(&y.accuracy)),
    ];
    let pass = checks.iter().all(|c| c.2);
    let detail: Vec<String> = checks
        .iter()
        .map(|(name, v, ok)| format!("{name}: {v:.4}{}", if *ok { "" } else { " (missed)" }))
        .collect();
    report(
        1,
        "per-device metrics, best params, seed 7",
        pass,
        &format!("{}; trained in {:.0}s", detail.join(", "), sh.train_seconds),
    );
    assert!(pass, "{detail:?}");
}

fn sweep_check(label: &str, events: usize, space: &SearchSpace, budget: usize, threshold: f64, minutes_limit: f64) {
    let started = Instant::now();
    let record = generate_record(&paper_scenario(), events, SEED).unwrap();
    let opts = TuneOptions {
        budget,
        seed: SEED,
        ..TuneOptions::default()
    };
    let rows = sweep_sequence_length(
        &[4, 8, 12, 16, 20, 24],
        space,
        |len| Holdout::new(record.clone(), len, TRAIN_FRACTION).map(|h| h.train),
        &opts,
    );
    let minutes = started.elapsed().as_secs_f64() / 60.0;
    let scores: Vec<String> = rows
        .iter()
        .map(|r| format!("{}: {}", r.seq_len, r.best_objective.map_or("failed".into(), |v| format!("{v:.4}"))))
        .collect();
    let pass = rows.iter().all(|r| r.best_objective.is_some_and(|v| v >= threshold)) && minutes < minutes_limit;
    report(
        2,
        &format!("{label}, budget {budget}, every length >= {threshold}, < {minutes_limit} min"),
        pass,
        &format!("{} in {minutes:.1} min", scores.join(", ")),
    );
    assert!(pass, "{scores:?} in {minutes:.1} min");
}

/// Budget 10, threshold 0.72, under 20 minutes. The record is shortened
/// and network width, depth and epochs are capped so sixty trials fit the
/// time limit on one core.
#[test]
fn criterion_2_sequence_length_sweep_smoke() {
    let mut space = SearchSpace::paper();
    space.num_hidden_layers = IntRange { lo: 1, hi: 3 };
    space.hidden_units = IntRange { lo: 3, hi: 64 };
    space.input_layer_units = IntRange { lo: 10, hi: 64 };
    space.epochs = IntRange { lo: 1, hi: 20 };
    sweep_check("sweep smoke", 200, &space, 10, 0.72, 20.0);
}

/// Full search space on the reference record. Hours on one core.
#[test]
#[ignore = "long running; run with --ignored"]
fn criterion_2_sequence_length_sweep_full() {
    sweep_check("full sweep", EVENTS, &SearchSpace::paper(), 25, 0.75, 120.0);
}

#[test]
fn criterion_3_lstm_beats_di() {
    let sh = shared();
    let graph = sh.holdout.di_graph(&Default::default(), SEED).unwrap();
    let di_pred = sh.holdout.di_predictions(&graph).unwrap();
    let di_report = sh.holdout.evaluate("di", "test", &di_pred).unwrap();
    let lstm = &sh.lstm_report.aggregate.metrics;
    let di = &di_report.aggregate.metrics;
    let g_lstm: GrantStats = sh.holdout.simulate(&sh.lstm_pred).unwrap();
    let g_di: GrantStats = sh.holdout.simulate(&di_pred).unwrap();

    let d_acc = lstm.accuracy - di.accuracy;
    let d_mcc = lstm.mcc - di.mcc;
    let checks = [
        (format!("accuracy delta {d_acc:+.4} >= 0.04"), d_acc >= 0.04),
        (format!("mcc delta {d_mcc:+.4} >= 0.05"), d_mcc >= 0.05),
        (
            format!("ra_reduction {:.4} > {:.4}", g_lstm.ra_reduction, g_di.ra_reduction),
            g_lstm.ra_reduction > g_di.ra_reduction,
        ),
        (
            format!("waste_fraction {:.4} < {:.4}", g_lstm.waste_fraction, g_di.waste_fraction),
            g_lstm.waste_fraction < g_di.waste_fraction,
        ),
    ];
    let pass = checks.iter().all(|c| c.1);
    let detail: Vec<String> = checks
        .iter()
        .map(|(d, ok)| format!("{d}{}", if *ok { "" } else { " (missed)" }))
        .collect();
    report(3, "LSTM vs DI on the shared test partition", pass, &detail.join(", "));
    assert!(pass, "{detail:?}");
}

#[test]
fn criterion_4_tuned_converges_faster() {
    let sh = shared();
    let hp = HyperParams::untuned_default();
    let model = LstmModel::init(&hp.layer_sizes(), hp.dropout, 5, SEED).unwrap();
    let (_, default_hist) = train(model, &sh.holdout.train, &hp.train_config(SEED)).unwrap();
    let target = default_hist.final_accuracy().unwrap();
    let tuned_final = sh.history.final_accuracy().unwrap();
    let tuned_epochs = sh.history.epochs_to_reach(target);
    let default_epochs = default_hist.epochs_to_reach(target).unwrap();
    let pass = tuned_epochs.is_some_and(|e| e < default_epochs) && tuned_final >= target;
    report(
        4,
        "tuned reaches the default's final accuracy sooner",
        pass,
        &format!(
            "default final {target:.4} at epoch {default_epochs}; tuned reaches it at epoch {}, final {tuned_final:.4}",
            tuned_epochs.map_or("never".into(), |e| e.to_string())
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_5_gradient_oracle() {
    let started = Instant::now();
    let mut worst = 0.0f64;
    for seed in 0..24 {
        let (model, x, y, masks, loss) = common::random_case(seed);
        worst = worst.max(common::max_gradient_error(&model, &x, &y, &masks, loss, 1e-5));
    }
    let secs = started.elapsed().as_secs_f64();
    let pass = worst < 1e-4 && secs < 60.0;
    report(
        5,
        "BPTT vs central differences, 24 models",
        pass,
        &format!("max relative error {worst:.2e} in {secs:.1}s"),
    );
    assert!(pass);
}

fn brute_metrics(c: &ConfusionCounts) -> [f64; 4] {
    let (tp, fp, tn, fn_) = (c.tp as f64, c.fp as f64, c.tn as f64, c.fn_ as f64);
    let sens = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
    let fdr = if tp + fp > 0.0 { fp / (tp + fp) } else { 0.0 };
    let acc = (tp + tn) / (tp + fp + tn + fn_);
    let den = ((tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_)).sqrt();
    let mcc = if den > 0.0 { (tp * tn - fp * fn_) / den } else { 0.0 };
    [sens, fdr, acc, mcc]
}

#[test]
fn criterion_6_metric_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut mismatches = 0;
    for _ in 0..1000 {
        let c = ConfusionCounts {
            tp: rng.gen_range(0..500),
            fp: rng.gen_range(0..500),
            tn: rng.gen_range(0..500),
            fn_: rng.gen_range(0..500) + 1,
        };
        let m = metrics(&c).unwrap();
        if [m.sensitivity, m.fdr, m.accuracy, m.mcc] != brute_metrics(&c) {
            mismatches += 1;
        }
    }
    let labels = Array2::from_shape_fn((400, 1), |(i, _)| (i % 3 == 0) as u8);
    let w = evaluate("perfect", "w", &["W".to_string()], labels.view(), labels.view()).unwrap();
    let pm = &w.devices[0].metrics;
    let perfect = (pm.sensitivity, pm.fdr, pm.accuracy, pm.mcc) == (1.0, 0.0, 1.0, 1.0);
    let pass = mismatches == 0 && perfect;
    report(
        6,
        "metrics vs scalar oracle, perfect row",
        pass,
        &format!("{mismatches} mismatches in 1000 matrices; perfect row exact: {perfect}"),
    );
    assert!(pass);
}

#[test]
fn criterion_7_di_direction_and_graph() {
    let started = Instant::now();
    let n = 100_000;
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let y: Vec<u8> = (0..n).map(|_| rng.gen_bool(0.5) as u8).collect();
    let mut t = vec![0u8; n];
    for i in 2..n {
        let fire = rng.gen_bool(0.7);
        t[i] = (y[i - 2] == 1 && fire) as u8;
    }
    let fwd = directed_information(&y, &t, 3).unwrap();
    let back = directed_information(&t, &y, 3).unwrap();

    let weakest = common::scenario_chains()
        .iter()
        .map(|(_, _, _, c)| common::exact_di(&common::chain_window_joint(c, 3), 3, true))
        .fold(f64::INFINITY, f64::min);
    let rec = generate_record(&paper_scenario(), n / 12 + 1, SEED).unwrap();
    let graph = infer_causal_graph(&rec, 4, 3, weakest / 2.0).unwrap();
    let mut got: Vec<String> = graph.edges.iter().map(|e| format!("{}->{} lag {}", e.source, e.target, e.lag)).collect();
    got.sort();
    let want = ["T->W lag 1", "X->Z lag 3", "Y->T lag 2"];
    let secs = started.elapsed().as_secs_f64();
    let pass = fwd >= 5.0 * back && got == want && secs < 60.0;
    report(
        7,
        "DI direction and graph recovery",
        pass,
        &format!(
            "DI(Y->T) {fwd:.4} vs DI(T->Y) {back:.5}; graph at threshold {:.4}: [{}] in {secs:.1}s",
            weakest / 2.0,
            got.join(", ")
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_8_simulator_identities() {
    let mut worst = 0.0f64;
    let mut conserved = true;
    for case in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(800 + case);
        let rec = generate_record(&paper_scenario(), rng.gen_range(10..60), case).unwrap();
        let warmup = rng.gen_range(0..24);
        let p = rng.gen_range(0.05..0.95);
        let pred = Array2::from_shape_fn((rec.total_steps() - warmup, 5), |_| rng.gen_bool(p) as u8);
        let stats = simulate_precomputed(&rec, pred.view(), warmup).unwrap();
        let labels = rec.data.slice(s![warmup.., ..]);
        let m = metrics(&confusion(pred.view(), labels).unwrap().pooled).unwrap();
        worst = worst.max((stats.waste_fraction - m.fdr).abs()).max((stats.ra_reduction - m.sensitivity).abs());
        let actual: u64 = labels.iter().map(|&v| v as u64).sum();
        conserved &= stats.grants_used + stats.ra_requests == actual;
    }
    let pass = worst <= 1e-9 && conserved;
    report(
        8,
        "grant identities over 10 random predictors",
        pass,
        &format!("max identity gap {worst:.1e}; conservation exact: {conserved}"),
    );
    assert!(pass);
}

fn run(dir: &Path, args: &[String]) {
    let out = Command::new(env!("CARGO_BIN_EXE_mtcpred")).current_dir(dir).args(args).output().unwrap();
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

/// Runs the pipeline into `first`, then replays every manifest's command
/// line into `second` and compares artifacts byte for byte.
#[test]
fn criterion_9_pipeline_determinism() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let steps: [&[&str]; 5] = [
        &["generate", "--events", "150"],
        &["train", "--best-paper-params", "--epochs", "3", "--record", "first/record.csv"],
        &["evaluate", "lstm", "--record", "first/record.csv", "--model", "first/model.json"],
        &["evaluate", "di", "--record", "first/record.csv"],
        &["simulate", "lstm", "--record", "first/record.csv", "--model", "first/model.json"],
    ];
    let mut manifests = Vec::new();
    for step in steps {
        let mut args = vec!["--out".to_string(), "first".to_string()];
        args.extend(step.iter().map(|s| s.to_string()));
        run(d, &args);
        manifests.push(match step[0] {
            "evaluate" | "simulate" => format!("manifest_{}_{}.json", step[0], step[1]),
            other => format!("manifest_{other}.json"),
        });
    }
    for name in &manifests {
        let manifest: serde_json::Value = serde_json::from_slice(&std::fs::read(d.join("first").join(name)).unwrap()).unwrap();
        let argv: Vec<String> = manifest["argv"].as_array().unwrap()[1..]
            .iter()
            .map(|a| a.as_str().unwrap().replace("first", "second"))
            .collect();
        run(d, &argv);
    }
    let mut compared = 0;
    let mut differing = Vec::new();
    for entry in std::fs::read_dir(d.join("first")).unwrap() {
        let name = entry.unwrap().file_name().into_string().unwrap();
        if name.starts_with("manifest_") {
            continue;
        }
        compared += 1;
        if std::fs::read(d.join("first").join(&name)).unwrap() != std::fs::read(d.join("second").join(&name)).unwrap() {
            differing.push(name);
        }
    }
    let pass = differing.is_empty() && compared >= 10;
    report(
        9,
        "generate -> train -> evaluate replayed from manifests",
        pass,
        &format!("{compared} artifacts compared, differing: {differing:?}"),
    );
    assert!(pass);
}
