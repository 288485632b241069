//! Function approximators: a small ReLU MLP trained by plain SGD, and a
//! lookup table over the 256 history states.

pub mod checkpoint;
pub mod gradcheck;
pub mod mlp;
pub mod qfunction;
pub mod tabular;

pub use mlp::{
    backward, forward, init_params, sgd_step, sync_target, Activations, Gradient, Layer, Mlp,
    SgdConfig, TargetNetwork, DEFAULT_HIDDEN,
};
pub use qfunction::{QBackend, QFunction, RegressionTarget};
pub use tabular::{state_index_of, tabular_lookup_update, TabularQ};

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}
