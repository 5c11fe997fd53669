//! Confusion counts and metrics for a few hand-made predictors, then a
//! delta table against the first.

use mtc_traffic::eval::{compare, evaluate, metrics, ConfusionCounts};
use mtc_traffic::traffic::{generate_record, paper_scenario};
use ndarray::{s, Array2};

fn main() -> mtc_traffic::Result<()> {
    let m = metrics(&ConfusionCounts { tp: 82, fp: 15, tn: 85, fn_: 18 })?;
    println!("tp 82 fp 15 tn 85 fn 18: {m:?}");

    let record = generate_record(&paper_scenario(), 200, 5)?;
    let labels = record.data.slice(s![1.., ..]).to_owned();
    let ids = &record.device_ids;

    // Repeat the previous row.
    let persist = record.data.slice(s![..-1, ..]).to_owned();
    let silent = Array2::<u8>::zeros(labels.dim());
    let oracle = labels.clone();

    let reports = [("persistence", &persist), ("silent", &silent), ("oracle", &oracle)]
        .into_iter()
        .map(|(name, pred)| evaluate(name, "demo", ids, pred.view(), labels.view()))
        .collect::<mtc_traffic::Result<Vec<_>>>()?;

    for r in &reports {
        let a = &r.aggregate.metrics;
        println!(
            "{:<12} sens {:.3} fdr {:.3} acc {:.3} mcc {:.3}{}",
            r.predictor,
            a.sensitivity,
            a.fdr,
            a.accuracy,
            a.mcc,
            if a.flags.is_empty() { String::new() } else { format!("  flags {:?}", a.flags) }
        );
    }
    print!("{}", compare(&reports)?.to_csv());
    Ok(())
}
