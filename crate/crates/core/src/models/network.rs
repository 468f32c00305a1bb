//! Fully connected feed-forward network with manual backpropagation, shared
//! by the MLP classifier and the autoencoder.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::frame::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Identity,
    Sigmoid,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Identity => z,
            Activation::Sigmoid => sigmoid(z),
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `a`.
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
            Activation::Sigmoid => a * (1.0 - a),
        }
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    /// Single sigmoid output against a 0/1 target, computed from the logit.
    BinaryCrossEntropy,
    /// Mean over outputs of the squared error.
    MeanSquared,
}

/// `outputs × inputs` weights stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Dense {
    pub fn init(inputs: usize, outputs: usize, activation: Activation, rng: &mut ChaCha8Rng) -> Self {
        let gain = if activation == Activation::Relu { 2.0 } else { 1.0 };
        let normal = Normal::new(0.0, (gain / inputs as f64).sqrt()).expect("finite std");
        Self {
            inputs,
            outputs,
            weights: (0..inputs * outputs).map(|_| normal.sample(rng)).collect(),
            bias: vec![0.0; outputs],
            activation,
        }
    }

    fn pre_activation(&self, x: &[f64], z: &mut Vec<f64>) {
        z.clear();
        for o in 0..self.outputs {
            let w = &self.weights[o * self.inputs..(o + 1) * self.inputs];
            let mut s = self.bias[o];
            for (wi, xi) in w.iter().zip(x) {
                s += wi * xi;
            }
            z.push(s);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub layers: Vec<Dense>,
}

/// Per-layer gradients, same shapes as the layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<Vec<f64>>,
}

impl Gradients {
    fn zeros_like(net: &Network) -> Self {
        Self {
            weights: net.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            bias: net.layers.iter().map(|l| vec![0.0; l.bias.len()]).collect(),
        }
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.bias) {
            out.extend_from_slice(w);
            out.extend_from_slice(b);
        }
        out
    }
}

/// Scratch buffers for one forward/backward pass.
#[derive(Default)]
struct Trace {
    zs: Vec<Vec<f64>>,
    acts: Vec<Vec<f64>>,
    delta: Vec<f64>,
    next_delta: Vec<f64>,
}

impl Network {
    /// `sizes` lists every layer width including input and output.
    pub fn new(sizes: &[usize], hidden: Activation, output: Activation, rng: &mut ChaCha8Rng) -> Self {
        assert!(sizes.len() >= 2, "network needs input and output sizes");
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(k, w)| {
                let act = if k + 2 == sizes.len() { output } else { hidden };
                Dense::init(w[0], w[1], act, rng)
            })
            .collect();
        Self { layers }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.outputs)
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn set_params(&mut self, p: &[f64]) {
        assert_eq!(p.len(), self.n_params());
        let mut k = 0;
        for l in &mut self.layers {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&p[k..k + nw]);
            k += nw;
            let nb = l.bias.len();
            l.bias.copy_from_slice(&p[k..k + nb]);
            k += nb;
        }
    }

    fn forward_trace(&self, x: &[f64], tr: &mut Trace) {
        tr.zs.resize_with(self.layers.len(), Vec::new);
        tr.acts.resize_with(self.layers.len(), Vec::new);
        for (k, layer) in self.layers.iter().enumerate() {
            let mut z = std::mem::take(&mut tr.zs[k]);
            let input: &[f64] = if k == 0 { x } else { &tr.acts[k - 1] };
            layer.pre_activation(input, &mut z);
            let mut a = std::mem::take(&mut tr.acts[k]);
            a.clear();
            a.extend(z.iter().map(|&v| layer.activation.apply(v)));
            tr.zs[k] = z;
            tr.acts[k] = a;
        }
    }

    /// Output activations for one row.
    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut tr = Trace::default();
        self.forward_trace(x, &mut tr);
        tr.acts.pop().unwrap_or_default()
    }

    /// Pre-activation of the last layer for one row.
    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        let mut tr = Trace::default();
        self.forward_trace(x, &mut tr);
        tr.zs.pop().unwrap_or_default()
    }

    /// Activations of layer `k` (0-based) for one row.
    pub fn activations_at(&self, x: &[f64], k: usize) -> Vec<f64> {
        let mut tr = Trace::default();
        self.forward_trace(x, &mut tr);
        tr.acts.swap_remove(k)
    }

    fn sample_loss(&self, tr: &Trace, target: &[f64], loss: Loss) -> f64 {
        match loss {
            Loss::BinaryCrossEntropy => {
                let z = tr.zs.last().expect("layers")[0];
                softplus(z) - target[0] * z
            }
            Loss::MeanSquared => {
                let out = tr.acts.last().expect("layers");
                let d = out.len() as f64;
                out.iter().zip(target).map(|(o, t)| (o - t) * (o - t)).sum::<f64>() / d
            }
        }
    }

    /// Mean loss over the given rows.
    pub fn loss(&self, inputs: &Matrix, targets: &Matrix, rows: &[usize], loss: Loss) -> f64 {
        let mut tr = Trace::default();
        let mut total = 0.0;
        for &i in rows {
            self.forward_trace(inputs.row(i), &mut tr);
            total += self.sample_loss(&tr, targets.row(i), loss);
        }
        total / rows.len().max(1) as f64
    }

    /// Mean loss and its gradient over the given rows.
    pub fn loss_and_gradient(
        &self,
        inputs: &Matrix,
        targets: &Matrix,
        rows: &[usize],
        loss: Loss,
    ) -> (f64, Gradients) {
        let mut grads = Gradients::zeros_like(self);
        let mut tr = Trace::default();
        let mut total = 0.0;
        let last = self.layers.len() - 1;
        for &i in rows {
            let x = inputs.row(i);
            let t = targets.row(i);
            self.forward_trace(x, &mut tr);
            total += self.sample_loss(&tr, t, loss);

            // dL/dz for the output layer
            tr.delta.clear();
            match loss {
                Loss::BinaryCrossEntropy => {
                    tr.delta.push(sigmoid(tr.zs[last][0]) - t[0]);
                }
                Loss::MeanSquared => {
                    let out = &tr.acts[last];
                    let d = out.len() as f64;
                    let layer = &self.layers[last];
                    for (k, (o, tv)) in out.iter().zip(t).enumerate() {
                        let da = 2.0 * (o - tv) / d;
                        tr.delta.push(da * layer.activation.derivative(tr.zs[last][k], *o));
                    }
                }
            }
            for k in (0..=last).rev() {
                let layer = &self.layers[k];
                let input: &[f64] = if k == 0 { x } else { &tr.acts[k - 1] };
                let gw = &mut grads.weights[k];
                for (o, &d) in tr.delta.iter().enumerate() {
                    grads.bias[k][o] += d;
                    let row = &mut gw[o * layer.inputs..(o + 1) * layer.inputs];
                    for (g, xi) in row.iter_mut().zip(input) {
                        *g += d * xi;
                    }
                }
                if k == 0 {
                    break;
                }
                let prev = &self.layers[k - 1];
                tr.next_delta.clear();
                tr.next_delta.resize(layer.inputs, 0.0);
                for (o, &d) in tr.delta.iter().enumerate() {
                    let w = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                    for (nd, wi) in tr.next_delta.iter_mut().zip(w) {
                        *nd += d * wi;
                    }
                }
                for (j, nd) in tr.next_delta.iter_mut().enumerate() {
                    *nd *= prev.activation.derivative(tr.zs[k - 1][j], tr.acts[k - 1][j]);
                }
                std::mem::swap(&mut tr.delta, &mut tr.next_delta);
            }
        }
        let scale = 1.0 / rows.len().max(1) as f64;
        for (w, b) in grads.weights.iter_mut().zip(grads.bias.iter_mut()) {
            w.iter_mut().for_each(|g| *g *= scale);
            b.iter_mut().for_each(|g| *g *= scale);
        }
        (total * scale, grads)
    }

    /// Plain gradient descent step.
    pub fn step(&mut self, grads: &Gradients, learning_rate: f64) {
        for (k, layer) in self.layers.iter_mut().enumerate() {
            for (w, g) in layer.weights.iter_mut().zip(&grads.weights[k]) {
                *w -= learning_rate * g;
            }
            for (b, g) in layer.bias.iter_mut().zip(&grads.bias[k]) {
                *b -= learning_rate * g;
            }
        }
    }
}

/// Fisher-Yates over `0..n` with the given generator.
pub(crate) fn shuffled(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        idx.swap(i, j);
    }
    idx
}
