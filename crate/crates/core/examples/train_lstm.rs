//! Trains the stacked LSTM with the best known hyper-parameters on the
//! five-device scenario and prints per-device test metrics.
//!
//! ```bash
//! cargo run --release --example train_lstm -- [num_events] [seed]
//! ```

use std::time::Instant;

use mtc_traffic::dataset::{split, window};
use mtc_traffic::eval::evaluate;
use mtc_traffic::lstm::{train, LstmModel};
use mtc_traffic::traffic::{generate_record, paper_scenario};
use mtc_traffic::tuner::HyperParams;

fn main() -> mtc_traffic::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let events: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(2000);
    let seed: u64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(7);

    let record = generate_record(&paper_scenario(), events, seed)?;
    let windows = window(&record, 12, 1)?;
    let (train_ds, test_ds) = split(&windows, 0.8)?;

    let hp = HyperParams::paper_best();
    let model = LstmModel::init(&hp.layer_sizes(), hp.dropout, record.num_devices(), seed)?;
    let started = Instant::now();
    let (model, history) = train(model, &train_ds, &hp.train_config(seed))?;
    for e in &history.epochs {
        println!("epoch {:>2}  loss {:.5}  acc {:.4}", e.epoch, e.loss, e.binary_accuracy);
    }
    println!("trained {} windows in {:.1?}", train_ds.len(), started.elapsed());

    let pred = model.predict(test_ds.inputs.view())?.mapv(|p| (p >= 0.5) as u8);
    let report = evaluate("lstm", "test", &record.device_ids, pred.view(), test_ds.binary_labels().view())?;
    println!("{:<10} {:>11} {:>8} {:>9} {:>8}", "device", "sensitivity", "fdr", "accuracy", "mcc");
    for row in report.devices.iter().chain([&report.aggregate]) {
        let m = &row.metrics;
        println!("{:<10} {:>11.4} {:>8.4} {:>9.4} {:>8.4}", row.scope, m.sensitivity, m.fdr, m.accuracy, m.mcc);
    }
    Ok(())
}
