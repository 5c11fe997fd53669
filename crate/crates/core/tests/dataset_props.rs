use mtc_traffic::dataset::{split, window};
use mtc_traffic::traffic::{generate_record, paper_scenario};
use ndarray::s;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn windows_reconstruct_the_record(events in 2usize..12, seq_len in 1usize..20, stride in 1usize..5, seed in any::<u64>()) {
        let rec = generate_record(&paper_scenario(), events, seed).unwrap();
        prop_assume!(seq_len < rec.total_steps());
        let ds = window(&rec, seq_len, stride).unwrap();
        let expected = (rec.total_steps() - seq_len - 1) / stride + 1;
        prop_assert_eq!(ds.len(), expected);
        prop_assert_eq!(ds.inputs.dim(), (expected, seq_len, 5));
        prop_assert_eq!(ds.labels.dim(), (expected, 5));
        for w in 0..ds.len() {
            let off = ds.source_offsets[w];
            prop_assert_eq!(off, w * stride);
            let rows = rec.data.slice(s![off..off + seq_len, ..]).mapv(f64::from);
            prop_assert_eq!(ds.inputs.slice(s![w, .., ..]), rows);
            prop_assert_eq!(ds.labels.row(w), rec.data.row(ds.label_row(w)).mapv(f64::from));
        }
    }

    #[test]
    fn split_is_chronological_without_leakage(events in 3usize..12, seq_len in 1usize..16, frac in 0.1f64..0.9, seed in any::<u64>()) {
        let rec = generate_record(&paper_scenario(), events, seed).unwrap();
        let ds = window(&rec, seq_len, 1).unwrap();
        let (train, test) = split(&ds, frac).unwrap();
        prop_assert_eq!(train.len() + test.len(), ds.len());
        prop_assert_eq!(train.len(), (frac * ds.len() as f64).round() as usize);
        let last_train_label = train.label_row(train.len() - 1);
        prop_assert!(test.source_offsets.iter().all(|&o| o > train.source_offsets[train.len() - 1]));
        prop_assert!(last_train_label < test.label_row(0) + 1);
        // every test label lies strictly after every training label
        prop_assert!((0..test.len()).all(|w| test.label_row(w) > last_train_label));
    }
}

#[test]
fn degenerate_requests_fail() {
    let rec = generate_record(&paper_scenario(), 1, 0).unwrap();
    assert!(window(&rec, 12, 1).is_err());
    assert!(window(&rec, 0, 1).is_err());
    let ds = window(&rec, 10, 1).unwrap();
    assert_eq!(ds.len(), 2);
    assert!(split(&ds, 0.2).is_err());
    assert!(split(&ds, 1.0).is_err());
}
