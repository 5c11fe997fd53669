#![allow(dead_code)]

use mtc_traffic::lstm::{DropoutMasks, LossKind, LstmModel};
use ndarray::{Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Largest relative deviation between analytic gradients and central
/// finite differences, with dropout masks held fixed.
pub fn max_gradient_error(model: &LstmModel, x: &Array3<f64>, y: &Array2<f64>, masks: &DropoutMasks, loss: LossKind, eps: f64) -> f64 {
    let (_, cache) = model.forward_with_masks(x.view(), Some(masks.clone())).unwrap();
    let analytic = model.backward(&cache, y.view(), loss).unwrap();

    let eval = |m: &LstmModel| {
        let (p, _) = m.forward_with_masks(x.view(), Some(masks.clone())).unwrap();
        loss.value(p.view(), y.view()).unwrap()
    };
    let mut probe = model.clone();
    let mut worst = 0.0f64;
    for (k, tensor) in analytic.tensors.iter().enumerate() {
        for (i, &a) in tensor.iter().enumerate() {
            let orig = probe.param_tensors()[k][i];
            probe.param_tensors_mut()[k][i] = orig + eps;
            let up = eval(&probe);
            probe.param_tensors_mut()[k][i] = orig - eps;
            let down = eval(&probe);
            probe.param_tensors_mut()[k][i] = orig;
            let numeric = (up - down) / (2.0 * eps);
            let scale = a.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max((a - numeric).abs() / scale);
        }
    }
    worst
}

/// Random small model, binary batch, labels and masks.
pub fn random_case(seed: u64) -> (LstmModel, Array3<f64>, Array2<f64>, DropoutMasks, LossKind) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let devices = rng.gen_range(1..=3);
    let layers: Vec<usize> = (0..rng.gen_range(1..=3)).map(|_| rng.gen_range(1..=4)).collect();
    let steps = rng.gen_range(1..=5);
    let batch = rng.gen_range(1..=4);
    let dropout = if rng.gen_bool(0.5) { 0.0 } else { 0.3 };
    let mut model = LstmModel::init(&layers, dropout, devices, seed).unwrap();
    // Spread weights beyond the init range so gates leave their linear regime.
    for t in model.param_tensors_mut() {
        for v in t.iter_mut() {
            *v *= 2.0;
        }
    }
    let x = Array3::from_shape_simple_fn((batch, steps, devices), || rng.gen_range(0..2) as f64);
    let y = Array2::from_shape_simple_fn((batch, devices), || rng.gen_range(0..2) as f64);
    let masks = model.sample_masks(batch, steps, &mut rng);
    let loss = if seed.is_multiple_of(2) { LossKind::Mse } else { LossKind::LogCosh };
    (model, x, y, masks, loss)
}

/// A source whose slots fire independently and a child copying it `lag`
/// steps later with probability `p`. With `event_len`, slot `s` fires with
/// `q[s]` and triggers never cross an event boundary; without it the
/// process is stationary with `q[0]`.
pub struct Chain {
    pub q: Vec<f64>,
    pub lag: usize,
    pub p: f64,
    pub event_len: Option<usize>,
}

/// Exact distribution of `(source[i-k..=i], child[i-k..=i])`, bit `j` of
/// each code holding position `i-k+j`, averaged over event phases.
pub fn chain_window_joint(chain: &Chain, k: usize) -> std::collections::HashMap<(u32, u32), f64> {
    let w = k + 1;
    let span = w + chain.lag;
    let phases = chain.event_len.unwrap_or(1);
    let mut joint = std::collections::HashMap::new();
    for phase in 0..phases {
        // position j in 0..span is absolute offset i - k - lag + j
        let slot_of = |j: usize| -> (i64, usize) {
            let rel = phase as i64 - (k + chain.lag) as i64 + j as i64;
            match chain.event_len {
                Some(len) => (rel.div_euclid(len as i64), rel.rem_euclid(len as i64) as usize),
                None => (0, 0),
            }
        };
        for src in 0u32..(1 << span) {
            let mut p_src = 1.0;
            for j in 0..span {
                let q = chain.q[slot_of(j).1];
                p_src *= if src >> j & 1 == 1 { q } else { 1.0 - q };
            }
            if p_src == 0.0 {
                continue;
            }
            for trig in 0u32..(1 << w) {
                let mut prob = p_src / phases as f64;
                let mut child = 0u32;
                for j in 0..w {
                    let pos = j + chain.lag;
                    let fires = trig >> j & 1 == 1;
                    prob *= if fires { chain.p } else { 1.0 - chain.p };
                    let same_event = slot_of(pos).0 == slot_of(j).0;
                    if fires && src >> j & 1 == 1 && same_event {
                        child |= 1 << j;
                    }
                }
                if prob > 0.0 {
                    *joint.entry((src >> chain.lag, child)).or_insert(0.0) += prob;
                }
            }
        }
    }
    joint
}

fn entropy(p: &std::collections::HashMap<(u32, u32), f64>) -> f64 {
    p.values().filter(|&&v| v > 0.0).map(|&v| -v * v.log2()).sum()
}

/// `H(Y_i | Y_past) - H(Y_i | Y_past, X_ctx)` of the window joint, where
/// `forward` picks source→child (else child→source).
pub fn exact_di(joint: &std::collections::HashMap<(u32, u32), f64>, k: usize, forward: bool) -> f64 {
    use std::collections::HashMap;
    let past_mask = (1u32 << k) - 1;
    let mut a_y: HashMap<(u32, u32), f64> = HashMap::new();
    let mut a: HashMap<(u32, u32), f64> = HashMap::new();
    let mut abx: HashMap<(u32, u32), f64> = HashMap::new();
    let mut ab: HashMap<(u32, u32), f64> = HashMap::new();
    for (&(s, c), &p) in joint {
        let (x, y) = if forward { (s, c) } else { (c, s) };
        let past = y & past_mask;
        *a_y.entry((past, y)).or_default() += p;
        *a.entry((past, 0)).or_default() += p;
        *abx.entry((x, y)).or_default() += p;
        *ab.entry((x, past)).or_default() += p;
    }
    (entropy(&a_y) - entropy(&a)) - (entropy(&abx) - entropy(&ab))
}

const X_SLOTS: [usize; 6] = [2, 3, 4, 5, 8, 9];

/// The three true edges of the built-in scenario as exact chains.
pub fn scenario_chains() -> Vec<(&'static str, &'static str, usize, Chain)> {
    let x_q = (0..12).map(|s| if X_SLOTS.contains(&s) { 0.5 } else { 0.0 }).collect();
    let t_q = (0..12).map(|s| if s >= 2 { 0.35 } else { 0.0 }).collect();
    vec![
        ("X", "Z", 3, Chain { q: x_q, lag: 3, p: 0.7, event_len: Some(12) }),
        ("Y", "T", 2, Chain { q: vec![0.5; 12], lag: 2, p: 0.7, event_len: Some(12) }),
        ("T", "W", 1, Chain { q: t_q, lag: 1, p: 1.0, event_len: Some(12) }),
    ]
}
