//! Replays a record slot by slot and hands out fast uplink grants from an
//! online directed-information predictor.

use mtc_traffic::di::{infer_causal_graph, predict_next};
use mtc_traffic::grant::{ra_reduction_report, reports_csv, simulate};
use mtc_traffic::traffic::{generate_record, paper_scenario};

fn main() -> mtc_traffic::Result<()> {
    let record = generate_record(&paper_scenario(), 1000, 3)?;
    let graph = infer_causal_graph(&record, 4, 3, 0.02)?;
    let warmup = record.event_len;
    let n = record.num_devices();

    let runs = [
        ("di", simulate(&record, |hist| predict_next(hist, &graph), warmup)?),
        ("all_grants", simulate(&record, |_| Ok(vec![1; n]), warmup)?),
        ("ra_only", simulate(&record, |_| Ok(vec![0; n]), warmup)?),
    ];
    for (name, s) in &runs {
        println!(
            "{name:<11} issued {:>6} used {:>6} wasted {:>6} ra {:>6} of {:>6}",
            s.grants_issued, s.grants_used, s.grants_wasted, s.ra_requests, s.ra_only_requests
        );
    }
    let reports: Vec<_> = runs.iter().map(|(name, s)| ra_reduction_report(name, s)).collect();
    print!("{}", reports_csv(&reports));
    Ok(())
}
