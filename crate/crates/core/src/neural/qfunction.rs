use std::fmt::Debug;

use crate::error::NeuralError;
use crate::neural::mlp::{Activations, Gradient, Mlp};
use crate::neural::tabular::{state_index_of, TabularQ};

/// One regression sample: pull `Q(inputs[input], action)` toward `target`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegressionTarget {
    pub input: usize,
    pub action: usize,
    pub target: f64,
}

/// A Q-function backend over two actions.
pub trait QFunction: Clone + Debug + Send {
    fn input_dim(&self) -> usize;

    fn q_values(&self, x: &[f64]) -> Result<[f64; 2], NeuralError>;

    /// One optimisation step on the batch. `inputs` holds each distinct input
    /// once; samples refer to it by position.
    fn regress(
        &mut self,
        inputs: &[Vec<f64>],
        samples: &[RegressionTarget],
        lr: f64,
    ) -> Result<(), NeuralError>;

    fn same_shape(&self, other: &Self) -> bool;
}

impl QFunction for Mlp {
    fn input_dim(&self) -> usize {
        Mlp::input_dim(self)
    }

    fn q_values(&self, x: &[f64]) -> Result<[f64; 2], NeuralError> {
        let out = self.forward(x)?;
        match out[..] {
            [a, b] => Ok([a, b]),
            _ => Err(NeuralError::DimensionMismatch {
                expected: 2,
                actual: out.len(),
            }),
        }
    }

    /// One SGD step on the mean of `0.5 * (Q(x, a) - target)^2`. Samples that
    /// share an input are folded into a single backward pass; the loss is
    /// linear in the output gradient so the result is the same gradient.
    fn regress(
        &mut self,
        inputs: &[Vec<f64>],
        samples: &[RegressionTarget],
        lr: f64,
    ) -> Result<(), NeuralError> {
        if samples.is_empty() {
            return Ok(());
        }
        let mut acts = vec![Activations::default(); inputs.len()];
        for (x, a) in inputs.iter().zip(acts.iter_mut()) {
            self.forward_into(x, a)?;
        }
        let n = samples.len() as f64;
        let out_dim = self.output_dim();
        let mut out_grads = vec![vec![0.0; out_dim]; inputs.len()];
        for s in samples {
            let q = acts
                .get(s.input)
                .ok_or(NeuralError::IndexOutOfRange(s.input))?
                .output();
            if s.action >= out_dim {
                return Err(NeuralError::IndexOutOfRange(s.action));
            }
            out_grads[s.input][s.action] += (q[s.action] - s.target) / n;
        }
        let mut grad = Gradient::zeros_like(self);
        for (a, og) in acts.iter().zip(&out_grads) {
            if og.iter().any(|&v| v != 0.0) {
                self.accumulate_backward(a, og, &mut grad);
            }
        }
        self.apply_gradient(&grad, lr)
    }

    fn same_shape(&self, other: &Self) -> bool {
        Mlp::same_shape(self, other)
    }
}

impl QFunction for TabularQ {
    fn input_dim(&self) -> usize {
        crate::game::OBS_DIM
    }

    fn q_values(&self, x: &[f64]) -> Result<[f64; 2], NeuralError> {
        self.get(state_index_of(x)?)
    }

    /// Sequential `q += lr * (target - q)` updates in batch order.
    fn regress(
        &mut self,
        inputs: &[Vec<f64>],
        samples: &[RegressionTarget],
        lr: f64,
    ) -> Result<(), NeuralError> {
        let states = inputs
            .iter()
            .map(|x| state_index_of(x))
            .collect::<Result<Vec<_>, _>>()?;
        for s in samples {
            let state = *states
                .get(s.input)
                .ok_or(NeuralError::IndexOutOfRange(s.input))?;
            self.update(state, s.action, s.target, lr)?;
        }
        Ok(())
    }

    fn same_shape(&self, other: &Self) -> bool {
        self.table.len() == other.table.len()
    }
}

/// Either backend, chosen at run time from configuration.
#[derive(Clone, Debug, PartialEq)]
pub enum QBackend {
    Tabular(TabularQ),
    Neural(Mlp),
}

impl QFunction for QBackend {
    fn input_dim(&self) -> usize {
        match self {
            QBackend::Tabular(t) => t.input_dim(),
            QBackend::Neural(m) => QFunction::input_dim(m),
        }
    }

    fn q_values(&self, x: &[f64]) -> Result<[f64; 2], NeuralError> {
        match self {
            QBackend::Tabular(t) => t.q_values(x),
            QBackend::Neural(m) => m.q_values(x),
        }
    }

    fn regress(
        &mut self,
        inputs: &[Vec<f64>],
        samples: &[RegressionTarget],
        lr: f64,
    ) -> Result<(), NeuralError> {
        match self {
            QBackend::Tabular(t) => t.regress(inputs, samples, lr),
            QBackend::Neural(m) => m.regress(inputs, samples, lr),
        }
    }

    fn same_shape(&self, other: &Self) -> bool {
        match (self, other) {
            (QBackend::Tabular(a), QBackend::Tabular(b)) => a.same_shape(b),
            (QBackend::Neural(a), QBackend::Neural(b)) => Mlp::same_shape(a, b),
            _ => false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::observation_from_index;

    #[test]
    fn folded_batch_matches_per_sample_mean_gradient() {
        let p = Mlp::new(&[8, 40, 40, 2], 21);
        let inputs: Vec<Vec<f64>> = [3u8, 200, 17].iter().map(|&s| observation_from_index(s).to_vec()).collect();
        let samples = [
            RegressionTarget { input: 0, action: 1, target: 2.0 },
            RegressionTarget { input: 1, action: 0, target: -1.0 },
            RegressionTarget { input: 0, action: 1, target: 5.0 },
            RegressionTarget { input: 2, action: 0, target: 0.5 },
            RegressionTarget { input: 0, action: 0, target: 1.0 },
        ];
        let mut folded = p.clone();
        folded.regress(&inputs, &samples, 0.1).unwrap();

        let mut mean = Gradient::zeros_like(&p);
        for s in &samples {
            let g = p.q_gradient(&inputs[s.input], s.action, s.target).unwrap();
            for (m, gl) in mean.layers.iter_mut().zip(&g.layers) {
                for (a, b) in m.weights.iter_mut().zip(&gl.weights) {
                    *a += b / samples.len() as f64;
                }
                for (a, b) in m.biases.iter_mut().zip(&gl.biases) {
                    *a += b / samples.len() as f64;
                }
            }
        }
        let mut reference = p.clone();
        reference.apply_gradient(&mean, 0.1).unwrap();
        for (a, b) in folded.params_flat().iter().zip(reference.params_flat()) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn tabular_regress_sequential() {
        let mut t = TabularQ::new(0.5);
        let inputs = vec![observation_from_index(9).to_vec()];
        let samples = [
            RegressionTarget { input: 0, action: 0, target: 4.0 },
            RegressionTarget { input: 0, action: 0, target: 4.0 },
        ];
        t.regress(&inputs, &samples, 0.5).unwrap();
        assert_eq!(t.table[9][0], 3.0);
    }
}
