//! Compares backpropagation-through-time gradients with central finite
//! differences on a small stacked model with dropout.

use mtc_traffic::lstm::{LossKind, LstmModel};
use ndarray::{Array2, Array3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> mtc_traffic::Result<()> {
    let model = LstmModel::init(&[4, 3], 0.3, 3, 11)?;
    let x = Array3::from_shape_fn((4, 5, 3), |(b, t, d)| ((b + 2 * t + d) % 3 == 0) as u8 as f64);
    let y = Array2::from_shape_fn((4, 3), |(b, d)| ((b + d) % 2) as f64);
    let masks = model.sample_masks(4, 5, &mut ChaCha8Rng::seed_from_u64(3));
    let eps = 1e-5;

    for loss in [LossKind::Mse, LossKind::LogCosh] {
        let (_, cache) = model.forward_with_masks(x.view(), Some(masks.clone()))?;
        let grads = model.backward(&cache, y.view(), loss)?;
        let eval = |m: &LstmModel| -> mtc_traffic::Result<f64> {
            let (p, _) = m.forward_with_masks(x.view(), Some(masks.clone()))?;
            loss.value(p.view(), y.view())
        };
        let mut probe = model.clone();
        let mut worst = 0.0f64;
        for (k, tensor) in grads.tensors.iter().enumerate() {
            for (i, &analytic) in tensor.iter().enumerate() {
                let orig = probe.param_tensors()[k][i];
                probe.param_tensors_mut()[k][i] = orig + eps;
                let up = eval(&probe)?;
                probe.param_tensors_mut()[k][i] = orig - eps;
                let down = eval(&probe)?;
                probe.param_tensors_mut()[k][i] = orig;
                let numeric = (up - down) / (2.0 * eps);
                worst = worst.max((analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6));
            }
        }
        println!("{loss:?}: {} parameters, max relative error {worst:.2e}", model.num_params());
    }
    Ok(())
}
