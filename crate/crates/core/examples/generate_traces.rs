//! Generates a transmission record for the five-device scenario and checks
//! the empirical trigger rates against the specification.
//!
//! ```bash
//! cargo run --release --example generate_traces -- [num_events] [seed] [out.csv]
//! ```

use mtc_traffic::traffic::{conditional_trigger_frequency, generate_record, paper_scenario, slot_histogram, validate_spec};

fn main() -> mtc_traffic::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let events: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(5000);
    let seed: u64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(7);

    let spec = paper_scenario();
    assert!(validate_spec(&spec).is_empty());
    let record = generate_record(&spec, events, seed)?;
    println!("{} events x {} slots, devices {:?}", record.num_events(), spec.event_len, record.device_ids);

    // Rows of the first event, one line per device.
    for (d, id) in record.device_ids.iter().enumerate() {
        let row: String = (0..spec.event_len).map(|t| if record.data[[t, d]] == 1 { '#' } else { '.' }).collect();
        println!("  {id}  {row}");
    }

    println!("transmissions per slot:");
    let hist = slot_histogram(&record);
    for (d, id) in record.device_ids.iter().enumerate() {
        let counts: Vec<String> = (0..spec.event_len).map(|s| format!("{:>5}", hist.get(&(d, s)).copied().unwrap_or(0))).collect();
        println!("  {id} {}", counts.join(""));
    }

    for (src, child, lag) in spec.dependency_edges() {
        let f = conditional_trigger_frequency(&record, src, child, lag).unwrap_or(f64::NAN);
        println!(
            "P({} fires | {} fired {lag} steps earlier) = {f:.4}",
            record.device_ids[child], record.device_ids[src]
        );
    }

    if let Some(path) = args.get(3) {
        record.write_csv(path)?;
        println!("wrote {path}");
    }
    Ok(())
}
