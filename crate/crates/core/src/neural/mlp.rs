use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::NeuralError;

/// Hidden widths used by every learner.
pub const DEFAULT_HIDDEN: [usize; 2] = [40, 40];

/// One affine layer. Weights are stored input-major: `weights[i * outputs + j]`
/// connects input `i` to output `j`.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Layer {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Layer {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            biases: vec![0.0; outputs],
        }
    }

    /// Weight from input `i` to output `j`.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.outputs + j]
    }

    pub fn set_weight(&mut self, i: usize, j: usize, w: f64) {
        self.weights[i * self.outputs + j] = w;
    }

    fn apply(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend_from_slice(&self.biases);
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            let row = &self.weights[i * self.outputs..(i + 1) * self.outputs];
            for (o, w) in out.iter_mut().zip(row) {
                *o += w * xi;
            }
        }
    }
}

/// Feed-forward network: ReLU hidden layers and a linear output head.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    layers: Vec<Layer>,
}

/// Per-layer activations kept from a forward pass for backprop.
#[derive(Clone, Debug, Default)]
pub struct Activations {
    /// `values[0]` is the input; `values[k]` the output of layer `k - 1`
    /// (after ReLU for hidden layers).
    values: Vec<Vec<f64>>,
}

impl Activations {
    pub fn output(&self) -> &[f64] {
        self.values.last().map(Vec::as_slice).unwrap_or(&[])
    }

    /// Post-ReLU values of every hidden unit, layer by layer.
    pub fn hidden_values(&self) -> impl Iterator<Item = f64> + '_ {
        let n = self.values.len();
        self.values[1.min(n)..n.saturating_sub(1)].iter().flatten().copied()
    }
}

/// Gradient with the same layout as the network's parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradient {
    pub layers: Vec<Layer>,
}

impl Gradient {
    pub fn zeros_like(p: &Mlp) -> Self {
        Gradient {
            layers: p.layers.iter().map(|l| Layer::zeros(l.inputs, l.outputs)).collect(),
        }
    }

    pub fn flat(&self) -> Vec<f64> {
        flatten(&self.layers)
    }

    pub fn scale(&mut self, k: f64) {
        for l in &mut self.layers {
            l.weights.iter_mut().chain(l.biases.iter_mut()).for_each(|v| *v *= k);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.flat().iter().all(|&v| v == 0.0)
    }
}

fn flatten(layers: &[Layer]) -> Vec<f64> {
    let mut out = Vec::new();
    for l in layers {
        out.extend_from_slice(&l.weights);
        out.extend_from_slice(&l.biases);
    }
    out
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        for k in 0..4 {
            acc[k] += a[4 * c + k] * b[4 * c + k];
        }
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in 4 * chunks..a.len() {
        s += a[i] * b[i];
    }
    s
}

impl Mlp {
    /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases.
    pub fn new(shape: &[usize], seed: u64) -> Self {
        assert!(shape.len() >= 2, "network needs an input and an output width");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = shape
            .windows(2)
            .map(|w| {
                let mut l = Layer::zeros(w[0], w[1]);
                let bound = 1.0 / (w[0] as f64).sqrt();
                for v in &mut l.weights {
                    *v = rng.gen_range(-bound..=bound);
                }
                l
            })
            .collect();
        Mlp { layers }
    }

    pub fn zeros(shape: &[usize]) -> Self {
        assert!(shape.len() >= 2, "network needs an input and an output width");
        Mlp {
            layers: shape.windows(2).map(|w| Layer::zeros(w[0], w[1])).collect(),
        }
    }

    /// `[input, hidden.., output]` widths.
    pub fn with_hidden(input: usize, hidden: &[usize], output: usize, seed: u64) -> Self {
        let mut shape = vec![input];
        shape.extend_from_slice(hidden);
        shape.push(output);
        Mlp::new(&shape, seed)
    }

    pub fn from_layers(layers: Vec<Layer>) -> Result<Self, NeuralError> {
        for w in layers.windows(2) {
            if w[0].outputs != w[1].inputs {
                return Err(NeuralError::DimensionMismatch {
                    expected: w[0].outputs,
                    actual: w[1].inputs,
                });
            }
        }
        for l in &layers {
            if l.weights.len() != l.inputs * l.outputs || l.biases.len() != l.outputs {
                return Err(NeuralError::DimensionMismatch {
                    expected: l.inputs * l.outputs + l.outputs,
                    actual: l.weights.len() + l.biases.len(),
                });
            }
        }
        if layers.is_empty() {
            return Err(NeuralError::DimensionMismatch { expected: 1, actual: 0 });
        }
        Ok(Mlp { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn shape(&self) -> Vec<usize> {
        let mut s = vec![self.layers[0].inputs];
        s.extend(self.layers.iter().map(|l| l.outputs));
        s
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    pub fn params_flat(&self) -> Vec<f64> {
        flatten(&self.layers)
    }

    pub fn set_params_flat(&mut self, flat: &[f64]) -> Result<(), NeuralError> {
        if flat.len() != self.num_params() {
            return Err(NeuralError::DimensionMismatch {
                expected: self.num_params(),
                actual: flat.len(),
            });
        }
        let mut k = 0;
        for l in &mut self.layers {
            for v in l.weights.iter_mut().chain(l.biases.iter_mut()) {
                *v = flat[k];
                k += 1;
            }
        }
        Ok(())
    }

    fn check_input(&self, x: &[f64]) -> Result<(), NeuralError> {
        if x.len() != self.input_dim() {
            return Err(NeuralError::DimensionMismatch {
                expected: self.input_dim(),
                actual: x.len(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, NeuralError> {
        let mut acts = Activations::default();
        self.forward_into(x, &mut acts)?;
        Ok(acts.values.pop().unwrap_or_default())
    }

    /// Forward pass keeping every layer's activations in `acts`.
    pub fn forward_into(&self, x: &[f64], acts: &mut Activations) -> Result<(), NeuralError> {
        self.check_input(x)?;
        let n = self.layers.len();
        acts.values.resize_with(n + 1, Vec::new);
        acts.values[0].clear();
        acts.values[0].extend_from_slice(x);
        for (k, layer) in self.layers.iter().enumerate() {
            let (done, rest) = acts.values.split_at_mut(k + 1);
            let out = &mut rest[0];
            layer.apply(&done[k], out);
            if k + 1 < n {
                out.iter_mut().for_each(|v| *v = v.max(0.0));
            }
        }
        Ok(())
    }

    /// Adds `d(out_grad . f(x))/d(params)` to `grad`, using activations from
    /// a prior [`forward_into`](Self::forward_into) on the same input.
    pub fn accumulate_backward(&self, acts: &Activations, out_grad: &[f64], grad: &mut Gradient) {
        let n = self.layers.len();
        let mut delta = out_grad.to_vec();
        let mut prev = Vec::new();
        for k in (0..n).rev() {
            let layer = &self.layers[k];
            let g = &mut grad.layers[k];
            let input = &acts.values[k];
            for (b, d) in g.biases.iter_mut().zip(&delta) {
                *b += d;
            }
            for (i, &xi) in input.iter().enumerate() {
                if xi == 0.0 {
                    continue;
                }
                let row = &mut g.weights[i * layer.outputs..(i + 1) * layer.outputs];
                for (w, d) in row.iter_mut().zip(&delta) {
                    *w += xi * d;
                }
            }
            if k == 0 {
                break;
            }
            prev.clear();
            for (i, &xi) in input.iter().enumerate() {
                // ReLU derivative of the previous layer's output.
                if xi > 0.0 {
                    let row = &layer.weights[i * layer.outputs..(i + 1) * layer.outputs];
                    prev.push(dot(row, &delta));
                } else {
                    prev.push(0.0);
                }
            }
            std::mem::swap(&mut delta, &mut prev);
        }
    }

    /// Gradient of `out_grad . f(x)` with respect to every parameter.
    pub fn backward_output(&self, x: &[f64], out_grad: &[f64]) -> Result<Gradient, NeuralError> {
        if out_grad.len() != self.output_dim() {
            return Err(NeuralError::DimensionMismatch {
                expected: self.output_dim(),
                actual: out_grad.len(),
            });
        }
        let mut acts = Activations::default();
        self.forward_into(x, &mut acts)?;
        let mut g = Gradient::zeros_like(self);
        self.accumulate_backward(&acts, out_grad, &mut g);
        Ok(g)
    }

    /// Gradient of `0.5 * (Q(x, action) - target)^2`.
    pub fn q_gradient(&self, x: &[f64], action: usize, target: f64) -> Result<Gradient, NeuralError> {
        let out = self.forward(x)?;
        if action >= out.len() {
            return Err(NeuralError::DimensionMismatch {
                expected: out.len(),
                actual: action + 1,
            });
        }
        let mut og = vec![0.0; out.len()];
        og[action] = out[action] - target;
        self.backward_output(x, &og)
    }

    /// `p <- p - lr * g`. Rejects non-finite gradients before touching the
    /// parameters and non-finite parameters after.
    pub fn apply_gradient(&mut self, g: &Gradient, lr: f64) -> Result<(), NeuralError> {
        if g.layers.len() != self.layers.len() {
            return Err(NeuralError::DimensionMismatch {
                expected: self.layers.len(),
                actual: g.layers.len(),
            });
        }
        let mut index = 0;
        for (l, gl) in self.layers.iter().zip(&g.layers) {
            if l.weights.len() != gl.weights.len() || l.biases.len() != gl.biases.len() {
                return Err(NeuralError::DimensionMismatch {
                    expected: l.weights.len() + l.biases.len(),
                    actual: gl.weights.len() + gl.biases.len(),
                });
            }
            for v in gl.weights.iter().chain(&gl.biases) {
                if !v.is_finite() {
                    return Err(NeuralError::NonFiniteGradient { index });
                }
                index += 1;
            }
        }
        let mut index = 0;
        for (l, gl) in self.layers.iter_mut().zip(&g.layers) {
            for (p, d) in l
                .weights
                .iter_mut()
                .zip(&gl.weights)
                .chain(l.biases.iter_mut().zip(&gl.biases))
            {
                *p -= lr * d;
                if !p.is_finite() {
                    return Err(NeuralError::NonFiniteParameter { index });
                }
                index += 1;
            }
        }
        Ok(())
    }

    pub fn same_shape(&self, other: &Mlp) -> bool {
        self.layers.len() == other.layers.len()
            && self
                .layers
                .iter()
                .zip(&other.layers)
                .all(|(a, b)| a.inputs == b.inputs && a.outputs == b.outputs)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SgdConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
}

impl Default for SgdConfig {
    fn default() -> Self {
        SgdConfig {
            learning_rate: 1e-4,
            batch_size: 300,
        }
    }
}

/// Deterministic parameters for `shape` from `seed`.
pub fn init_params(seed: u64, shape: &[usize]) -> Mlp {
    Mlp::new(shape, seed)
}

pub fn forward(p: &Mlp, x: &[f64]) -> Result<Vec<f64>, NeuralError> {
    p.forward(x)
}

/// Gradient of `0.5 * (Q(x, a) - td_target)^2` with respect to all parameters.
pub fn backward(p: &Mlp, x: &[f64], action_index: usize, td_target: f64) -> Result<Gradient, NeuralError> {
    p.q_gradient(x, action_index, td_target)
}

pub fn sgd_step(p: &Mlp, g: &Gradient, cfg: &SgdConfig) -> Result<Mlp, NeuralError> {
    let mut next = p.clone();
    next.apply_gradient(g, cfg.learning_rate)?;
    Ok(next)
}

/// A frozen snapshot of an online network, refreshed every `sync_interval`
/// gradient steps.
#[derive(Clone, Debug, PartialEq)]
pub struct TargetNetwork<P> {
    pub params: P,
    pub sync_interval: usize,
    updates_since_sync: usize,
}

impl<P: Clone> TargetNetwork<P> {
    pub fn new(online: &P, sync_interval: usize) -> Self {
        TargetNetwork {
            params: online.clone(),
            sync_interval: sync_interval.max(1),
            updates_since_sync: 0,
        }
    }

    /// Records one online update; syncs once `sync_interval` have accumulated.
    /// Returns whether a sync happened.
    pub fn after_update(&mut self, online: &P) -> bool {
        self.updates_since_sync += 1;
        if self.updates_since_sync >= self.sync_interval {
            self.params = online.clone();
            self.updates_since_sync = 0;
            true
        } else {
            false
        }
    }

    pub fn updates_since_sync(&self) -> usize {
        self.updates_since_sync
    }
}

pub fn sync_target(online: &Mlp, t: &TargetNetwork<Mlp>) -> Result<TargetNetwork<Mlp>, NeuralError> {
    if !online.same_shape(&t.params) {
        return Err(NeuralError::DimensionMismatch {
            expected: t.params.num_params(),
            actual: online.num_params(),
        });
    }
    Ok(TargetNetwork {
        params: online.clone(),
        sync_interval: t.sync_interval,
        updates_since_sync: 0,
    })
}
