//! Stacked LSTM with a logistic dense head, forward pass and exact BPTT.
//!
//! Gate pre-activations of a layer with `H` units are laid out as four
//! column blocks `[input | forget | candidate | output]` of width `H`:
//!
//! ```text
//! z_t = x_t · W_x + h_{t-1} · W_h + b
//! i = σ(z_i)   f = σ(z_f)   g = tanh(z_g)   o = σ(z_o)
//! c_t = f ⊙ c_{t-1} + i ⊙ g
//! h_t = o ⊙ tanh(c_t)
//! ```
//!
//! Internally sequences are time-major (`seq_len × batch × width`) so each
//! step is a contiguous row-major matrix.

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array1, Array2, Array3, ArrayView2, ArrayView3, Axis};
use rand::distributions::{Distribution, Uniform};
use rand::Rng;

use super::loss::LossKind;
use crate::error::{Error, Result};
use crate::seed::{self, stream};

#[derive(Clone, Debug, PartialEq)]
pub struct LstmLayer {
    /// `input_dim × 4H`
    pub w_x: Array2<f64>,
    /// `H × 4H`
    pub w_h: Array2<f64>,
    /// `4H`
    pub bias: Array1<f64>,
}

impl LstmLayer {
    pub fn units(&self) -> usize {
        self.w_h.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.w_x.nrows()
    }
}

#[derive(Clone, Debug)]
pub struct LstmModel {
    pub(crate) layers: Vec<LstmLayer>,
    /// `H_last × num_devices`
    pub(crate) dense_w: Array2<f64>,
    pub(crate) dense_b: Array1<f64>,
    pub(crate) dropout_rate: f64,
    // Bumped whenever parameters may have changed; caches remember it.
    revision: u64,
}

impl PartialEq for LstmModel {
    fn eq(&self, other: &Self) -> bool {
        self.layers == other.layers
            && self.dense_w == other.dense_w
            && self.dense_b == other.dense_b
            && self.dropout_rate == other.dropout_rate
    }
}

/// Inverted-dropout multipliers (0 or `1/(1-rate)`), one tensor per boundary
/// between consecutive LSTM layers, each `seq_len × batch × units`.
#[derive(Clone, Debug, PartialEq)]
pub struct DropoutMasks {
    pub masks: Vec<Array3<f64>>,
}

struct LayerCache {
    /// Layer input after dropout, `T × B × D`.
    input: Array3<f64>,
    /// Activated gates, `T × B × 4H`.
    gates: Array3<f64>,
    /// `c_0 … c_T`, `(T+1) × B × H`.
    cells: Array3<f64>,
    /// `h_0 … h_T`.
    hiddens: Array3<f64>,
    tanh_cells: Array3<f64>,
}

/// Activations retained by a training-mode forward pass.
pub struct ForwardCache {
    revision: u64,
    training: bool,
    layers: Vec<LayerCache>,
    masks: Option<DropoutMasks>,
    top: Array2<f64>,
    predictions: Array2<f64>,
}

impl ForwardCache {
    pub fn predictions(&self) -> &Array2<f64> {
        &self.predictions
    }
}

/// Gradients in the order of [`LstmModel::param_tensors`].
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub tensors: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn max_abs(&self) -> f64 {
        self.tensors
            .iter()
            .flat_map(|t| t.iter())
            .fold(0.0f64, |m, &g| m.max(g.abs()))
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn flat(a: impl IntoIterator<Item = f64>) -> Vec<f64> {
    a.into_iter().collect()
}

impl LstmModel {
    /// Uniform `±1/√fan_in` weights (fan-in of a gate unit is
    /// `input_dim + H`; of a dense unit `H_last`), forget-gate bias 1,
    /// remaining biases 0.
    pub fn init(layer_sizes: &[usize], dropout_rate: f64, num_devices: usize, seed: u64) -> Result<Self> {
        if layer_sizes.is_empty() {
            return Err(Error::arg("at least one LSTM layer is required"));
        }
        if num_devices == 0 || layer_sizes.contains(&0) {
            return Err(Error::arg("layer sizes and device count must be at least 1"));
        }
        if !(0.0..1.0).contains(&dropout_rate) {
            return Err(Error::arg(format!("dropout rate {dropout_rate} outside [0, 1)")));
        }
        let mut rng = seed::rng(seed, stream::INIT, 0);
        let mut uniform = |rows: usize, cols: usize, fan_in: usize| {
            let a = 1.0 / (fan_in as f64).sqrt();
            let dist = Uniform::new_inclusive(-a, a);
            Array2::from_shape_simple_fn((rows, cols), || dist.sample(&mut rng))
        };
        let mut layers = Vec::with_capacity(layer_sizes.len());
        let mut input_dim = num_devices;
        for &h in layer_sizes {
            let w_x = uniform(input_dim, 4 * h, input_dim + h);
            let w_h = uniform(h, 4 * h, input_dim + h);
            let mut bias = Array1::zeros(4 * h);
            bias.slice_mut(s![h..2 * h]).fill(1.0);
            layers.push(LstmLayer { w_x, w_h, bias });
            input_dim = h;
        }
        let dense_w = uniform(input_dim, num_devices, input_dim);
        Ok(Self {
            layers,
            dense_w,
            dense_b: Array1::zeros(num_devices),
            dropout_rate,
            revision: 0,
        })
    }

    /// Builds a model from explicit parameters, checking that shapes chain.
    pub fn from_parts(layers: Vec<LstmLayer>, dense_w: Array2<f64>, dense_b: Array1<f64>, dropout_rate: f64) -> Result<Self> {
        let Some(first) = layers.first() else {
            return Err(Error::arg("at least one LSTM layer is required"));
        };
        let mut input_dim = first.input_dim();
        for (k, l) in layers.iter().enumerate() {
            let h = l.units();
            if l.input_dim() != input_dim || l.w_h.ncols() != 4 * h || l.w_x.ncols() != 4 * h || l.bias.len() != 4 * h {
                return Err(Error::shape(format!("layer {k} parameters do not chain")));
            }
            input_dim = h;
        }
        if dense_w.nrows() != input_dim || dense_w.ncols() != dense_b.len() || dense_b.len() != first.input_dim() {
            return Err(Error::shape("dense head does not map the last layer to the device count"));
        }
        if !(0.0..1.0).contains(&dropout_rate) {
            return Err(Error::arg(format!("dropout rate {dropout_rate} outside [0, 1)")));
        }
        Ok(Self {
            layers,
            dense_w,
            dense_b,
            dropout_rate,
            revision: 0,
        })
    }

    pub fn num_devices(&self) -> usize {
        self.dense_b.len()
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        self.layers.iter().map(LstmLayer::units).collect()
    }

    pub fn dropout_rate(&self) -> f64 {
        self.dropout_rate
    }

    pub fn layers(&self) -> &[LstmLayer] {
        &self.layers
    }

    pub fn dense(&self) -> (&Array2<f64>, &Array1<f64>) {
        (&self.dense_w, &self.dense_b)
    }

    /// Parameter tensors: `w_x, w_h, bias` per layer, then dense weight
    /// and dense bias, each flattened row-major.
    pub fn param_tensors(&self) -> Vec<&[f64]> {
        let mut out = Vec::with_capacity(3 * self.layers.len() + 2);
        for l in &self.layers {
            out.push(l.w_x.as_slice().expect("standard layout"));
            out.push(l.w_h.as_slice().expect("standard layout"));
            out.push(l.bias.as_slice().expect("standard layout"));
        }
        out.push(self.dense_w.as_slice().expect("standard layout"));
        out.push(self.dense_b.as_slice().expect("standard layout"));
        out
    }

    /// Mutable view of every parameter tensor. Invalidates earlier caches.
    pub fn param_tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.revision += 1;
        let mut out = Vec::with_capacity(3 * self.layers.len() + 2);
        for l in &mut self.layers {
            out.push(l.w_x.as_slice_mut().expect("standard layout"));
            out.push(l.w_h.as_slice_mut().expect("standard layout"));
            out.push(l.bias.as_slice_mut().expect("standard layout"));
        }
        out.push(self.dense_w.as_slice_mut().expect("standard layout"));
        out.push(self.dense_b.as_slice_mut().expect("standard layout"));
        out
    }

    pub fn num_params(&self) -> usize {
        self.param_tensors().iter().map(|t| t.len()).sum()
    }

    pub fn sample_masks<R: Rng + ?Sized>(&self, batch: usize, seq_len: usize, rng: &mut R) -> DropoutMasks {
        let keep = 1.0 - self.dropout_rate;
        let scale = 1.0 / keep;
        let masks = self.layers[..self.layers.len() - 1]
            .iter()
            .map(|l| {
                Array3::from_shape_simple_fn((seq_len, batch, l.units()), || {
                    if self.dropout_rate == 0.0 || rng.gen::<f64>() < keep {
                        scale
                    } else {
                        0.0
                    }
                })
            })
            .collect();
        DropoutMasks { masks }
    }

    /// Forward pass over a `batch × seq_len × num_devices` tensor. With
    /// `training` set, fresh dropout masks are drawn from `rng`.
    pub fn forward<R: Rng + ?Sized>(&self, batch: ArrayView3<f64>, training: bool, rng: &mut R) -> Result<(Array2<f64>, ForwardCache)> {
        if training {
            let (b, t, _) = batch.dim();
            let masks = self.sample_masks(b, t, rng);
            self.forward_with_masks(batch, Some(masks))
        } else {
            self.forward_with_masks(batch, None)
        }
    }

    /// Forward pass with caller-supplied masks (`Some` = training mode).
    pub fn forward_with_masks(&self, batch: ArrayView3<f64>, masks: Option<DropoutMasks>) -> Result<(Array2<f64>, ForwardCache)> {
        let (b, t_len, d) = batch.dim();
        if d != self.num_devices() {
            return Err(Error::shape(format!("batch width {d}, model expects {}", self.num_devices())));
        }
        if t_len == 0 || b == 0 {
            return Err(Error::shape("empty batch or zero-length sequences"));
        }
        if let Some(m) = &masks {
            let ok = m.masks.len() + 1 == self.layers.len()
                && m.masks
                    .iter()
                    .zip(&self.layers)
                    .all(|(mask, l)| mask.dim() == (t_len, b, l.units()));
            if !ok {
                return Err(Error::shape("dropout masks do not match batch and layers"));
            }
        }

        let mut input = batch.permuted_axes([1, 0, 2]).as_standard_layout().into_owned();
        let mut caches = Vec::with_capacity(self.layers.len());
        for (k, layer) in self.layers.iter().enumerate() {
            let cache = layer_forward(layer, input);
            if k + 1 < self.layers.len() {
                let mut next = cache.hiddens.slice(s![1.., .., ..]).to_owned();
                if let Some(m) = &masks {
                    next *= &m.masks[k];
                }
                input = next;
            } else {
                input = Array3::zeros((0, 0, 0));
            }
            caches.push(cache);
        }
        let last = caches.last().expect("non-empty");
        let top = last.hiddens.index_axis(Axis(0), t_len).to_owned();
        let mut predictions = top.dot(&self.dense_w);
        predictions += &self.dense_b;
        predictions.mapv_inplace(sigmoid);

        let cache = ForwardCache {
            revision: self.revision,
            training: masks.is_some(),
            layers: caches,
            masks,
            top,
            predictions: predictions.clone(),
        };
        Ok((predictions, cache))
    }

    /// Inference over any number of windows, processed in chunks.
    pub fn predict(&self, inputs: ArrayView3<f64>) -> Result<Array2<f64>> {
        const CHUNK: usize = 256;
        let n = inputs.len_of(Axis(0));
        let mut out = Array2::zeros((n, self.num_devices()));
        let mut start = 0;
        while start < n {
            let end = (start + CHUNK).min(n);
            let (p, _) = self.forward_with_masks(inputs.slice(s![start..end, .., ..]), None)?;
            out.slice_mut(s![start..end, ..]).assign(&p);
            start = end;
        }
        Ok(out)
    }

    /// Exact gradient of `loss(predictions, labels)` by backpropagation
    /// through time, through the dropout masks and the logistic head.
    pub fn backward(&self, cache: &ForwardCache, labels: ArrayView2<f64>, loss: LossKind) -> Result<Gradients> {
        if cache.revision != self.revision || cache.layers.len() != self.layers.len() {
            return Err(Error::State("forward cache was produced by different parameters".into()));
        }
        if !cache.training {
            return Err(Error::State("backward needs a training-mode forward cache".into()));
        }
        let pred = &cache.predictions;
        let d_pred = loss.gradient(pred.view(), labels)?;
        let d_logit = d_pred * &pred.mapv(|p| p * (1.0 - p));

        let d_dense_w = cache.top.t().dot(&d_logit);
        let d_dense_b = d_logit.sum_axis(Axis(0));
        let d_top = d_logit.dot(&self.dense_w.t());

        let last = cache.layers.last().expect("non-empty");
        let (t_len, b, _) = last.input.dim();
        let mut d_hidden = Array3::<f64>::zeros((t_len, b, self.layers.last().unwrap().units()));
        d_hidden.index_axis_mut(Axis(0), t_len - 1).assign(&d_top);

        let mut per_layer = Vec::with_capacity(self.layers.len());
        for k in (0..self.layers.len()).rev() {
            let (grads, d_input) = layer_backward(&self.layers[k], &cache.layers[k], &d_hidden, k > 0);
            per_layer.push(grads);
            if let Some(mut dx) = d_input {
                if let Some(m) = &cache.masks {
                    dx *= &m.masks[k - 1];
                }
                d_hidden = dx;
            }
        }
        per_layer.reverse();

        let mut tensors = Vec::with_capacity(3 * per_layer.len() + 2);
        for [w_x, w_h, bias] in per_layer {
            tensors.push(w_x);
            tensors.push(w_h);
            tensors.push(bias);
        }
        tensors.push(flat(d_dense_w.as_standard_layout().iter().copied()));
        tensors.push(d_dense_b.to_vec());
        Ok(Gradients { tensors })
    }
}

/// Convenience constructor mirroring [`LstmModel::init`].
pub fn init_model(layer_sizes: &[usize], dropout_rate: f64, num_devices: usize, seed: u64) -> Result<LstmModel> {
    LstmModel::init(layer_sizes, dropout_rate, num_devices, seed)
}

fn layer_forward(layer: &LstmLayer, input: Array3<f64>) -> LayerCache {
    let (t_len, b, d) = input.dim();
    let h = layer.units();
    let pre = {
        let x2 = input.view().into_shape_with_order((t_len * b, d)).expect("contiguous input");
        let mut p = x2.dot(&layer.w_x);
        p += &layer.bias;
        p
    };
    let mut gates = pre.into_shape_with_order((t_len, b, 4 * h)).expect("contiguous gates");
    let mut cells = Array3::<f64>::zeros((t_len + 1, b, h));
    let mut hiddens = Array3::<f64>::zeros((t_len + 1, b, h));
    let mut tanh_cells = Array3::<f64>::zeros((t_len, b, h));

    for t in 0..t_len {
        let mut z = gates.index_axis_mut(Axis(0), t);
        general_mat_mul(1.0, &hiddens.index_axis(Axis(0), t), &layer.w_h, 1.0, &mut z);
        let z = z.into_slice().expect("contiguous step");

        let (c_prev, mut c_next) = cells.view_mut().split_at(Axis(0), t + 1);
        let c_prev = c_prev.index_axis_move(Axis(0), t);
        let c_prev = c_prev.as_slice().expect("contiguous");
        let c_next = c_next.index_axis_mut(Axis(0), 0).into_slice().expect("contiguous");
        let h_next = hiddens.index_axis_mut(Axis(0), t + 1).into_slice().expect("contiguous");
        let tc = tanh_cells.index_axis_mut(Axis(0), t).into_slice().expect("contiguous");

        for bi in 0..b {
            let zr = &mut z[bi * 4 * h..(bi + 1) * 4 * h];
            let base = bi * h;
            for j in 0..h {
                let i = sigmoid(zr[j]);
                let f = sigmoid(zr[h + j]);
                let g = zr[2 * h + j].tanh();
                let o = sigmoid(zr[3 * h + j]);
                zr[j] = i;
                zr[h + j] = f;
                zr[2 * h + j] = g;
                zr[3 * h + j] = o;
                let c = f * c_prev[base + j] + i * g;
                let tanh_c = c.tanh();
                c_next[base + j] = c;
                tc[base + j] = tanh_c;
                h_next[base + j] = o * tanh_c;
            }
        }
    }
    LayerCache {
        input,
        gates,
        cells,
        hiddens,
        tanh_cells,
    }
}

/// Returns `[dW_x, dW_h, db]` and, when asked, the gradient w.r.t. the
/// layer input (`T × B × D`).
fn layer_backward(layer: &LstmLayer, cache: &LayerCache, d_hidden: &Array3<f64>, need_input_grad: bool) -> ([Vec<f64>; 3], Option<Array3<f64>>) {
    let (t_len, b, d) = cache.input.dim();
    let h = layer.units();
    let mut dz = Array3::<f64>::zeros((t_len, b, 4 * h));
    let mut dh_next = Array2::<f64>::zeros((b, h));
    let mut dc_next = vec![0.0; b * h];
    let w_h_t = layer.w_h.t();

    for t in (0..t_len).rev() {
        let gates = cache.gates.index_axis(Axis(0), t);
        let gates = gates.as_slice().expect("contiguous");
        let tc = cache.tanh_cells.index_axis(Axis(0), t);
        let tc = tc.as_slice().expect("contiguous");
        let c_prev = cache.cells.index_axis(Axis(0), t);
        let c_prev = c_prev.as_slice().expect("contiguous");
        let dh_out = d_hidden.index_axis(Axis(0), t);
        let dh_out = dh_out.as_slice().expect("contiguous");
        let dh_rec = dh_next.as_slice().expect("contiguous");
        let mut dz_t = dz.index_axis_mut(Axis(0), t);
        {
            let dzs = dz_t.as_slice_mut().expect("contiguous");
            for bi in 0..b {
                let gr = &gates[bi * 4 * h..(bi + 1) * 4 * h];
                let dzr = &mut dzs[bi * 4 * h..(bi + 1) * 4 * h];
                let base = bi * h;
                for j in 0..h {
                    let idx = base + j;
                    let (i, f, g, o) = (gr[j], gr[h + j], gr[2 * h + j], gr[3 * h + j]);
                    let dh = dh_out[idx] + dh_rec[idx];
                    let tanh_c = tc[idx];
                    let dc = dh * o * (1.0 - tanh_c * tanh_c) + dc_next[idx];
                    dzr[j] = dc * g * i * (1.0 - i);
                    dzr[h + j] = dc * c_prev[idx] * f * (1.0 - f);
                    dzr[2 * h + j] = dc * i * (1.0 - g * g);
                    dzr[3 * h + j] = dh * tanh_c * o * (1.0 - o);
                    dc_next[idx] = dc * f;
                }
            }
        }
        if t > 0 {
            general_mat_mul(1.0, &dz_t.view(), &w_h_t, 0.0, &mut dh_next);
        }
    }

    let dz2 = dz.view().into_shape_with_order((t_len * b, 4 * h)).expect("contiguous");
    let x2 = cache.input.view().into_shape_with_order((t_len * b, d)).expect("contiguous");
    let h_prev = cache.hiddens.slice(s![..t_len, .., ..]);
    let h_prev = h_prev.into_shape_with_order((t_len * b, h)).expect("contiguous");
    let d_wx = x2.t().dot(&dz2);
    let d_wh = h_prev.t().dot(&dz2);
    let d_b = dz2.sum_axis(Axis(0));
    let d_input = need_input_grad.then(|| {
        dz2.dot(&layer.w_x.t())
            .into_shape_with_order((t_len, b, d))
            .expect("contiguous")
    });
    (
        [
            flat(d_wx.as_standard_layout().iter().copied()),
            flat(d_wh.as_standard_layout().iter().copied()),
            d_b.to_vec(),
        ],
        d_input,
    )
}
