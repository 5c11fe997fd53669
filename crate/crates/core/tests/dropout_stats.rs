use mtc_traffic::lstm::LstmModel;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn inverted_dropout_preserves_expectation() {
    let rate = 0.27;
    let model = LstmModel::init(&[6, 5], rate, 3, 0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let (mut sum, mut zeros, mut n) = (0.0, 0usize, 0usize);
    for _ in 0..10_000 {
        let m = model.sample_masks(1, 1, &mut rng);
        assert_eq!(m.masks.len(), 1, "masks only between stacked layers");
        for &v in m.masks[0].iter() {
            assert!(v == 0.0 || (v - 1.0 / (1.0 - rate)).abs() < 1e-12);
            sum += v;
            zeros += (v == 0.0) as usize;
            n += 1;
        }
    }
    let mean = sum / n as f64;
    assert!((mean - 1.0).abs() < 0.02, "mean mask {mean}");
    assert!((zeros as f64 / n as f64 - rate).abs() < 0.02);
}

#[test]
fn inference_is_deterministic_and_mask_free() {
    let model = LstmModel::init(&[4, 4], 0.5, 2, 1).unwrap();
    let x = ndarray::Array3::from_shape_fn((3, 5, 2), |(b, t, d)| ((b + t + d) % 2) as f64);
    let a = model.predict(x.view()).unwrap();
    let b = model.predict(x.view()).unwrap();
    assert_eq!(a, b);
    let (c, _) = model.forward_with_masks(x.view(), None).unwrap();
    assert_eq!(a, c);
}
