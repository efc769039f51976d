//! Fully-connected autoencoder internals: forward pass, backprop, and the
//! adaptive-moment optimizer. Everything is full-batch f64; the populations
//! here are small enough that simplicity and exact reproducibility beat
//! throughput tricks.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// One dense layer, weights stored row-major as `out_dim x in_dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub in_dim: usize,
    pub out_dim: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl Layer {
    fn glorot(in_dim: usize, out_dim: usize, rng: &mut ChaCha8Rng) -> Layer {
        let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let w = (0..in_dim * out_dim).map(|_| rng.gen_range(-limit..limit)).collect();
        Layer { in_dim, out_dim, w, b: vec![0.0; out_dim] }
    }
}

/// Mirrored encoder/decoder stack. Hidden layers are rectified; the final
/// decoder layer is linear.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Layer>,
}

/// Encoder widths under the shrink rule `w_i = max(2, round(w_{i-1} / decay))`.
pub fn encoder_widths(input_dim: usize, num_layers: usize, decay: f64) -> Vec<usize> {
    let mut widths = vec![input_dim];
    for _ in 0..num_layers {
        let prev = *widths.last().expect("non-empty") as f64;
        widths.push(((prev / decay).round() as usize).max(2));
    }
    widths
}

impl Mlp {
    /// Builds encoder plus mirrored decoder; parameter draw order is fixed.
    pub fn init(input_dim: usize, num_layers: usize, decay: f64, rng: &mut ChaCha8Rng) -> Mlp {
        let widths = encoder_widths(input_dim, num_layers, decay);
        let mut layers = Vec::with_capacity(2 * num_layers);
        for i in 0..num_layers {
            layers.push(Layer::glorot(widths[i], widths[i + 1], rng));
        }
        for i in (0..num_layers).rev() {
            layers.push(Layer::glorot(widths[i + 1], widths[i], rng));
        }
        Mlp { layers }
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(&l.w);
            out.extend_from_slice(&l.b);
        }
        out
    }

    pub fn from_flat(&mut self, flat: &[f64]) {
        let mut at = 0;
        for l in &mut self.layers {
            let wl = l.w.len();
            l.w.copy_from_slice(&flat[at..at + wl]);
            at += wl;
            let bl = l.b.len();
            l.b.copy_from_slice(&flat[at..at + bl]);
            at += bl;
        }
        assert_eq!(at, flat.len(), "flat parameter vector has wrong length");
    }

    /// Forward pass over `n` rows; returns post-activation outputs per layer
    /// (the last entry is the reconstruction). `masks` holds one dropout
    /// multiplier buffer per hidden layer.
    pub fn forward(&self, x: &[f64], n: usize, masks: Option<&[Vec<f64>]>) -> Vec<Vec<f64>> {
        let mut outputs: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        let last = self.layers.len() - 1;
        for (li, layer) in self.layers.iter().enumerate() {
            let input: &[f64] = if li == 0 { x } else { &outputs[li - 1] };
            let mut out = vec![0.0; n * layer.out_dim];
            for r in 0..n {
                let row_in = &input[r * layer.in_dim..(r + 1) * layer.in_dim];
                let row_out = &mut out[r * layer.out_dim..(r + 1) * layer.out_dim];
                for (o, slot) in row_out.iter_mut().enumerate() {
                    let wrow = &layer.w[o * layer.in_dim..(o + 1) * layer.in_dim];
                    let mut acc = layer.b[o];
                    for (wv, xv) in wrow.iter().zip(row_in) {
                        acc += wv * xv;
                    }
                    *slot = acc;
                }
            }
            if li != last {
                for v in out.iter_mut() {
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
                if let Some(masks) = masks {
                    for (v, m) in out.iter_mut().zip(&masks[li]) {
                        *v *= m;
                    }
                }
            }
            outputs.push(out);
        }
        outputs
    }

    /// Backpropagates `delta` (gradient of the loss w.r.t. the reconstruction,
    /// shape `n x input_dim`) through the stack; adds `weight_decay * w` for
    /// the quadratic penalty. Returns gradients in layer shape.
    pub fn backward(
        &self,
        x: &[f64],
        n: usize,
        outputs: &[Vec<f64>],
        masks: Option<&[Vec<f64>]>,
        mut delta: Vec<f64>,
        weight_decay: f64,
    ) -> Vec<Layer> {
        let mut grads: Vec<Layer> = self
            .layers
            .iter()
            .map(|l| Layer {
                in_dim: l.in_dim,
                out_dim: l.out_dim,
                w: vec![0.0; l.w.len()],
                b: vec![0.0; l.b.len()],
            })
            .collect();
        for li in (0..self.layers.len()).rev() {
            let layer = &self.layers[li];
            let input: &[f64] = if li == 0 { x } else { &outputs[li - 1] };
            let grad = &mut grads[li];
            for r in 0..n {
                let d_row = &delta[r * layer.out_dim..(r + 1) * layer.out_dim];
                let in_row = &input[r * layer.in_dim..(r + 1) * layer.in_dim];
                for (o, dv) in d_row.iter().enumerate() {
                    grad.b[o] += dv;
                    let wrow = &mut grad.w[o * layer.in_dim..(o + 1) * layer.in_dim];
                    for (slot, xv) in wrow.iter_mut().zip(in_row) {
                        *slot += dv * xv;
                    }
                }
            }
            for (gw, w) in grad.w.iter_mut().zip(&layer.w) {
                *gw += weight_decay * w;
            }
            if li == 0 {
                break;
            }
            // Gradient w.r.t. this layer's input, then through the previous
            // layer's dropout and rectifier.
            let mut prev = vec![0.0; n * layer.in_dim];
            for r in 0..n {
                let d_row = &delta[r * layer.out_dim..(r + 1) * layer.out_dim];
                let p_row = &mut prev[r * layer.in_dim..(r + 1) * layer.in_dim];
                for (o, dv) in d_row.iter().enumerate() {
                    let wrow = &layer.w[o * layer.in_dim..(o + 1) * layer.in_dim];
                    for (slot, wv) in p_row.iter_mut().zip(wrow) {
                        *slot += dv * wv;
                    }
                }
            }
            let hidden = &outputs[li - 1];
            if let Some(masks) = masks {
                for ((p, &h), m) in prev.iter_mut().zip(hidden).zip(&masks[li - 1]) {
                    // h is the post-ReLU, post-mask value; it is nonzero only
                    // where the unit was active and kept.
                    *p = if h > 0.0 { *p * m } else { 0.0 };
                }
            } else {
                for (p, &h) in prev.iter_mut().zip(hidden) {
                    if h <= 0.0 {
                        *p = 0.0;
                    }
                }
            }
            delta = prev;
        }
        grads
    }

    /// Smallest hidden pre-activation magnitude over a forward pass.
    ///
    /// Finite-difference oracles are only trustworthy away from the rectifier
    /// kinks; callers screen check points with this and re-draw when a unit
    /// sits too close to zero.
    pub fn min_hidden_preactivation(&self, x: &[f64], n: usize) -> f64 {
        let mut min_abs = f64::INFINITY;
        let mut input = x.to_vec();
        let last = self.layers.len() - 1;
        for (li, layer) in self.layers.iter().enumerate() {
            let mut out = vec![0.0; n * layer.out_dim];
            for r in 0..n {
                let row_in = &input[r * layer.in_dim..(r + 1) * layer.in_dim];
                for o in 0..layer.out_dim {
                    let wrow = &layer.w[o * layer.in_dim..(o + 1) * layer.in_dim];
                    let mut acc = layer.b[o];
                    for (wv, xv) in wrow.iter().zip(row_in) {
                        acc += wv * xv;
                    }
                    if li != last {
                        min_abs = min_abs.min(acc.abs());
                    }
                    out[r * layer.out_dim + o] = if li != last { acc.max(0.0) } else { acc };
                }
            }
            input = out;
        }
        min_abs
    }

    /// Sum of squared weights (biases excluded), for the decay penalty.
    pub fn weight_sq_sum(&self) -> f64 {
        self.layers.iter().map(|l| l.w.iter().map(|w| w * w).sum::<f64>()).sum()
    }

    /// Samples inverted-dropout multiplier buffers for each hidden layer.
    pub fn sample_masks(&self, n: usize, rate: f64, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
        let keep_scale = 1.0 / (1.0 - rate);
        self.layers[..self.layers.len() - 1]
            .iter()
            .map(|l| {
                (0..n * l.out_dim)
                    .map(|_| if rng.gen_range(0.0..1.0) < rate { 0.0 } else { keep_scale })
                    .collect()
            })
            .collect()
    }
}

/// Adaptive-moment gradient descent with bias-corrected moments.
pub struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Adam {
    pub fn new(param_count: usize, lr: f64) -> Adam {
        Adam {
            m: vec![0.0; param_count],
            v: vec![0.0; param_count],
            t: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for ((p, &g), (m, v)) in
            params.iter_mut().zip(grads).zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}
