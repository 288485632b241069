//! Central finite-difference verification of the analytic gradients.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::game::OBS_DIM;
use crate::neural::mlp::{Activations, Mlp, DEFAULT_HIDDEN};
use crate::neural::softmax;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradcheckConfig {
    pub probes: usize,
    pub epsilon: f64,
    pub tolerance: f64,
    /// Magnitudes below this are compared in absolute rather than relative terms.
    pub magnitude_floor: f64,
    pub seed: u64,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        GradcheckConfig {
            probes: 100,
            epsilon: 1e-5,
            tolerance: 1e-4,
            magnitude_floor: 1e-4,
            seed: 0x5eed,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct GradcheckReport {
    pub probes: usize,
    pub components_checked: usize,
    /// Components whose finite-difference stencil crosses a ReLU kink.
    pub components_skipped: usize,
    pub max_rel_error: f64,
    pub failures: usize,
}

impl GradcheckReport {
    pub fn passed(&self) -> bool {
        self.failures == 0 && self.components_checked > 0
    }

    fn merge(&mut self, other: &GradcheckReport) {
        self.probes += other.probes;
        self.components_checked += other.components_checked;
        self.components_skipped += other.components_skipped;
        self.max_rel_error = self.max_rel_error.max(other.max_rel_error);
        self.failures += other.failures;
    }
}

/// Which scalar loss the probe differentiates.
#[derive(Clone, Copy, Debug)]
enum Loss {
    /// `0.5 * (Q(x, a) - target)^2`
    TdSquared { action: usize, target: f64 },
    /// `-log softmax(f(x))[class]`
    CrossEntropy { class: usize },
}

impl Loss {
    fn value(&self, out: &[f64]) -> f64 {
        match *self {
            Loss::TdSquared { action, target } => 0.5 * (out[action] - target).powi(2),
            Loss::CrossEntropy { class } => -softmax(out)[class].ln(),
        }
    }

    fn output_grad(&self, out: &[f64]) -> Vec<f64> {
        match *self {
            Loss::TdSquared { action, target } => {
                let mut g = vec![0.0; out.len()];
                g[action] = out[action] - target;
                g
            }
            Loss::CrossEntropy { class } => {
                let mut g = softmax(out);
                g[class] -= 1.0;
                g
            }
        }
    }
}

fn activation_pattern(p: &Mlp, x: &[f64]) -> (Vec<bool>, Vec<f64>) {
    let mut acts = Activations::default();
    p.forward_into(x, &mut acts).expect("probe input has the network's width");
    // Hidden outputs are post-ReLU: positive exactly when the unit is active.
    let out = acts.output().to_vec();
    let pattern = acts.hidden_values().map(|v| v > 0.0).collect();
    (pattern, out)
}

fn check_probe(p: &Mlp, x: &[f64], loss: Loss, cfg: &GradcheckConfig) -> GradcheckReport {
    let mut report = GradcheckReport {
        probes: 1,
        ..Default::default()
    };
    let out = p.forward(x).expect("probe input has the network's width");
    let analytic = p
        .backward_output(x, &loss.output_grad(&out))
        .expect("output gradient has the network's width")
        .flat();
    let base = p.params_flat();
    let mut work = p.clone();
    for (k, &a) in analytic.iter().enumerate() {
        let mut plus = base.clone();
        plus[k] += cfg.epsilon;
        work.set_params_flat(&plus).expect("same parameter count");
        let (pattern_plus, out_plus) = activation_pattern(&work, x);
        let mut minus = base.clone();
        minus[k] -= cfg.epsilon;
        work.set_params_flat(&minus).expect("same parameter count");
        let (pattern_minus, out_minus) = activation_pattern(&work, x);
        if pattern_plus != pattern_minus {
            report.components_skipped += 1;
            continue;
        }
        let numeric = (loss.value(&out_plus) - loss.value(&out_minus)) / (2.0 * cfg.epsilon);
        let denom = a.abs().max(numeric.abs()).max(cfg.magnitude_floor);
        let rel = (a - numeric).abs() / denom;
        report.components_checked += 1;
        report.max_rel_error = report.max_rel_error.max(rel);
        if !(rel < cfg.tolerance) {
            report.failures += 1;
        }
    }
    report
}

fn random_probe_net(rng: &mut ChaCha8Rng, input: usize) -> Mlp {
    let mut p = Mlp::with_hidden(input, &DEFAULT_HIDDEN, 2, rng.gen());
    // Non-zero biases so every layer's bias path is exercised.
    for l in p.layers_mut() {
        for b in &mut l.biases {
            *b = rng.gen_range(-0.5..0.5);
        }
    }
    p
}

fn random_input(rng: &mut ChaCha8Rng, with_strategy: bool) -> Vec<f64> {
    let mut x: Vec<f64> = (0..OBS_DIM).map(|_| f64::from(rng.gen::<bool>() as u8)).collect();
    if with_strategy {
        let y: f64 = rng.gen();
        x.extend([y, 1.0 - y]);
    }
    x
}

/// TD-loss gradients on 8-d and 10-d (strategy-augmented) Q networks.
pub fn check_q_gradients(cfg: &GradcheckConfig) -> GradcheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut report = GradcheckReport::default();
    for i in 0..cfg.probes {
        let augmented = i % 2 == 1;
        let p = random_probe_net(&mut rng, if augmented { OBS_DIM + 2 } else { OBS_DIM });
        let x = random_input(&mut rng, augmented);
        let loss = Loss::TdSquared {
            action: rng.gen_range(0..2),
            target: rng.gen_range(-20.0..20.0),
        };
        report.merge(&check_probe(&p, &x, loss, cfg));
    }
    report
}

/// Cross-entropy gradients of the opponent-model network.
pub fn check_cross_entropy_gradients(cfg: &GradcheckConfig) -> GradcheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0xce);
    let mut report = GradcheckReport::default();
    for _ in 0..cfg.probes {
        let p = random_probe_net(&mut rng, OBS_DIM);
        let x = random_input(&mut rng, false);
        let loss = Loss::CrossEntropy {
            class: rng.gen_range(0..2),
        };
        report.merge(&check_probe(&p, &x, loss, cfg));
    }
    report
}
