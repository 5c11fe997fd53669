//! Tunes once per input sequence length and prints the accuracy curve.
//!
//! ```bash
//! cargo run --release --example sequence_length_sweep -- [budget]
//! ```

use mtc_traffic::experiment::Holdout;
use mtc_traffic::traffic::{generate_record, paper_scenario};
use mtc_traffic::tuner::{sweep_csv, sweep_sequence_length, IntRange, SearchSpace, TuneOptions};

fn main() {
    let budget = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(6);
    let record = generate_record(&paper_scenario(), 200, 7).expect("valid scenario");
    let mut space = SearchSpace::paper();
    space.epochs = IntRange { lo: 1, hi: 12 };
    space.num_hidden_layers = IntRange { lo: 1, hi: 2 };
    space.hidden_units = IntRange { lo: 3, hi: 32 };
    space.input_layer_units = IntRange { lo: 10, hi: 32 };

    let opts = TuneOptions { budget, seed: 7, ..TuneOptions::default() };
    let rows = sweep_sequence_length(
        &[4, 8, 12, 16, 20, 24],
        &space,
        |len| Holdout::new(record.clone(), len, 0.8).map(|h| h.train),
        &opts,
    );
    print!("{}", sweep_csv(&rows));
    for r in rows.iter().filter(|r| r.error.is_some()) {
        eprintln!("length {} failed: {}", r.seq_len, r.error.as_deref().unwrap_or(""));
    }
}
