//! Estimates pairwise directed information and recovers the device
//! dependency graph.

use mtc_traffic::di::{calibrate_threshold, infer_causal_graph, pairwise_estimates, DEFAULT_MAX_LAG, DEFAULT_ORDER, DEFAULT_THRESHOLD};
use mtc_traffic::traffic::{generate_record, paper_scenario};

fn main() -> mtc_traffic::Result<()> {
    let record = generate_record(&paper_scenario(), 2000, 7)?;
    let k = DEFAULT_ORDER;

    let ids = &record.device_ids;
    let est = pairwise_estimates(&record, k)?;
    println!("directed information, bits/step (row = source, column = target)");
    println!("     {}", ids.iter().map(|id| format!("{id:>8}")).collect::<String>());
    for src in ids {
        let row: String = ids
            .iter()
            .map(|dst| match est.iter().find(|e| &e.source == src && &e.target == dst) {
                Some(e) => format!("{:>8.4}", e.value),
                None => format!("{:>8}", "-"),
            })
            .collect();
        println!("  {src}  {row}");
    }

    let threshold = calibrate_threshold(&record, k, 2, 0.99, 7)?;
    println!("default threshold {DEFAULT_THRESHOLD}, calibrated {threshold:.4}");
    let graph = infer_causal_graph(&record, DEFAULT_MAX_LAG, k, DEFAULT_THRESHOLD)?;
    for e in &graph.edges {
        println!(
            "{} -> {}  lag {}  strength {:.4}  trigger prob {:.3}",
            e.source, e.target, e.lag, e.strength, e.trigger_prob
        );
    }
    Ok(())
}
