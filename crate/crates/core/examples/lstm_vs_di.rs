//! Trains the LSTM and fits the DI baseline on the same training events,
//! then compares both on the held-out partition. The DI graph needs a
//! long record; below about 600 events it loses its true edges.
//!
//! ```bash
//! cargo run --release --example lstm_vs_di -- [num_events] [epochs]
//! ```

use mtc_traffic::eval::compare;
use mtc_traffic::experiment::{DiConfig, Holdout};
use mtc_traffic::grant::{ra_reduction_report, reports_csv};
use mtc_traffic::lstm::{train, LstmModel};
use mtc_traffic::traffic::{generate_record, paper_scenario};
use mtc_traffic::tuner::HyperParams;

fn main() -> mtc_traffic::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let events = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(2000);
    let mut hp = HyperParams::paper_best();
    if let Some(e) = args.get(2).and_then(|s| s.parse().ok()) {
        hp.epochs = e;
    }
    let seed = 7;

    let holdout = Holdout::new(generate_record(&paper_scenario(), events, seed)?, 12, 0.8)?;
    let model = LstmModel::init(&hp.layer_sizes(), hp.dropout, 5, seed)?;
    let (model, _) = train(model, &holdout.train, &hp.train_config(seed))?;
    let lstm_pred = holdout.lstm_predictions(&model, 0.5)?;

    let graph = holdout.di_graph(&DiConfig::default(), seed)?;
    let di_pred = holdout.di_predictions(&graph)?;

    let reports = [holdout.evaluate("lstm", "test", &lstm_pred)?, holdout.evaluate("di", "test", &di_pred)?];
    print!("{}", compare(&reports)?.to_csv());

    let grants = [
        ra_reduction_report("lstm", &holdout.simulate(&lstm_pred)?),
        ra_reduction_report("di", &holdout.simulate(&di_pred)?),
    ];
    print!("{}", reports_csv(&grants));
    Ok(())
}
