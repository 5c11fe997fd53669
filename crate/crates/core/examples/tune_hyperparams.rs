//! Bayesian hyper-parameter search on a short record with a narrowed space.
//!
//! ```bash
//! cargo run --release --example tune_hyperparams -- [budget] [jobs]
//! ```

use mtc_traffic::dataset::window;
use mtc_traffic::traffic::{generate_record, paper_scenario};
use mtc_traffic::tuner::{tune, IntRange, SearchSpace, TuneOptions};

fn main() -> mtc_traffic::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let budget = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(12);
    let jobs = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1);

    let record = generate_record(&paper_scenario(), 300, 7)?;
    let ds = window(&record, 12, 1)?;
    let mut space = SearchSpace::paper();
    space.epochs = IntRange { lo: 1, hi: 15 };
    space.num_hidden_layers = IntRange { lo: 1, hi: 2 };
    space.hidden_units = IntRange { lo: 3, hi: 48 };
    space.input_layer_units = IntRange { lo: 10, hi: 48 };

    let opts = TuneOptions { budget, jobs, seed: 7, ..TuneOptions::default() };
    let outcome = tune(&space, &ds, &opts)?;
    println!("{:>3} {:>8} {:>6} {:>7} {:>6} {:>9}  loss/opt", "#", "val_acc", "batch", "epochs", "units", "lr");
    for t in &outcome.log {
        let hp = &t.hyperparams;
        let score = t.objective.map_or("failed".to_string(), |v| format!("{v:.4}"));
        println!(
            "{:>3} {score:>8} {:>6} {:>7} {:>6} {:>9.5}  {:?}/{:?}",
            t.index, hp.batch_size, hp.epochs, format!("{:?}", hp.layer_sizes()), hp.learning_rate, hp.loss, hp.optimizer
        );
    }
    let best = &outcome.best;
    println!("best: {:?}", best.hyperparams);
    println!("      validation accuracy {:.4}", best.objective.unwrap_or(f64::NAN));
    Ok(())
}
