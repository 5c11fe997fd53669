use mtc_traffic::eval::{confusion, metrics};
use mtc_traffic::grant::{ra_reduction_report, simulate, simulate_precomputed};
use mtc_traffic::traffic::{generate_record, paper_scenario_with};
use ndarray::{s, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn grant_stats_equal_prediction_metrics() {
    for case in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(case);
        let rec = generate_record(&paper_scenario_with(rng.gen_range(0.1..0.9), rng.gen_range(0.1..0.9)), rng.gen_range(5..40), case).unwrap();
        let warmup = rng.gen_range(0..rec.total_steps() / 2);
        let bias = rng.gen_range(0.05..0.95);
        let preds = Array2::from_shape_fn((rec.total_steps() - warmup, rec.num_devices()), |_| rng.gen_bool(bias) as u8);
        let stats = simulate_precomputed(&rec, preds.view(), warmup).unwrap();
        let labels = rec.data.slice(s![warmup.., ..]);
        let m = metrics(&confusion(preds.view(), labels).unwrap().pooled).unwrap();
        let actual = labels.iter().map(|&v| v as u64).sum::<u64>();

        assert_eq!(stats.grants_used + stats.ra_requests, actual);
        assert_eq!(stats.grants_issued, stats.grants_used + stats.grants_wasted);
        assert!((stats.waste_fraction - m.fdr).abs() < 1e-9);
        assert!((stats.ra_reduction - m.sensitivity).abs() < 1e-9);
        let report = ra_reduction_report("random", &stats);
        assert!((report.ra_reduction - report.sensitivity).abs() < 1e-9);

        let oracle = simulate_precomputed(&rec, labels, warmup).unwrap();
        assert!(oracle.ra_reduction >= stats.ra_reduction);
        assert!(oracle.waste_fraction <= stats.waste_fraction);
    }
}

#[test]
fn history_predictor_sees_only_the_past() {
    let rec = generate_record(&paper_scenario_with(0.5, 0.5), 10, 3).unwrap();
    let mut expected_len = 12;
    let stats = simulate(
        &rec,
        |h| {
            assert_eq!(h.nrows(), expected_len);
            expected_len += 1;
            // repeat the previous slot
            Ok(h.row(h.nrows() - 1).to_vec())
        },
        12,
    )
    .unwrap();
    assert_eq!(stats.slots, 108);
}
