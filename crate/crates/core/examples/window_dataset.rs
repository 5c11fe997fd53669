//! Cuts a record into next-step prediction windows and splits them
//! chronologically.
//!
//! ```bash
//! cargo run --example window_dataset -- [seq_len]
//! ```

use mtc_traffic::dataset::{split, window};
use mtc_traffic::traffic::{generate_record, paper_scenario};

fn main() -> mtc_traffic::Result<()> {
    let seq_len: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(12);
    let record = generate_record(&paper_scenario(), 100, 1)?;
    let ds = window(&record, seq_len, 1)?;
    println!("record {} steps -> {} windows of shape {:?}", record.total_steps(), ds.len(), &ds.inputs.shape()[1..]);

    let (train, test) = split(&ds, 0.8)?;
    println!("train {} windows, test {} windows", train.len(), test.len());
    println!("first test window predicts record row {}", test.label_row(0));

    let w = 0;
    println!("window {w} (time flows down), label row {}:", ds.label_row(w));
    for t in 0..seq_len {
        let row: Vec<String> = ds.inputs.slice(ndarray::s![w, t, ..]).iter().map(|v| format!("{v:.0}")).collect();
        println!("  {}", row.join(" "));
    }
    let label: Vec<String> = ds.labels.row(w).iter().map(|v| format!("{v:.0}")).collect();
    println!("  -> {}", label.join(" "));

    // Windows never look past their label row.
    for i in 0..ds.len() {
        assert_eq!(ds.label_row(i), i + seq_len);
    }
    Ok(())
}
