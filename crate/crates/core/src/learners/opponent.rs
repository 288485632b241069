use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{LearnerError, NeuralError};
use crate::game::{observation_from_index, NUM_STATES, OBS_DIM};
use crate::learners::buffer::ReplayBuffer;
use crate::learners::td::Experience;
use crate::neural::{argmax, softmax, Activations, Gradient, Mlp};

/// Maps an observation to a distribution over the opponent's next action.
#[derive(Clone, Debug, PartialEq)]
pub enum OpponentPredictor {
    Network(Mlp),
    /// Fixed output regardless of state; never trained.
    Constant([f64; 2]),
}

#[derive(Clone, Debug, PartialEq)]
pub struct OpponentModel {
    pub predictor: OpponentPredictor,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Only the newest this-many experiences are used for fitting.
    pub recent_window: usize,
    rng: ChaCha8Rng,
}

impl OpponentModel {
    pub fn network(hidden: &[usize], learning_rate: f64, batch_size: usize, recent_window: usize, seed: u64) -> Self {
        OpponentModel {
            predictor: OpponentPredictor::Network(Mlp::with_hidden(OBS_DIM, hidden, 2, seed)),
            learning_rate,
            batch_size,
            recent_window,
            rng: ChaCha8Rng::seed_from_u64(seed ^ 0x6f70_706d),
        }
    }

    pub fn constant(y: [f64; 2]) -> Self {
        OpponentModel {
            predictor: OpponentPredictor::Constant(y),
            learning_rate: 0.0,
            batch_size: 1,
            recent_window: 1,
            rng: ChaCha8Rng::seed_from_u64(0),
        }
    }

    /// The estimated mixed strategy `y(s)`: `[P(C), P(D)]`.
    pub fn predict(&self, state: u8) -> Result<[f64; 2], NeuralError> {
        match &self.predictor {
            OpponentPredictor::Constant(y) => Ok(*y),
            OpponentPredictor::Network(net) => {
                let p = softmax(&net.forward(&observation_from_index(state))?);
                Ok([p[0], p[1]])
            }
        }
    }

    /// `y(s)` for every state, computed once.
    pub fn predict_all(&self) -> Result<Vec<[f64; 2]>, NeuralError> {
        (0..NUM_STATES).map(|s| self.predict(s as u8)).collect()
    }

    /// One SGD step of cross-entropy on a batch drawn from the newest
    /// `recent_window` experiences. Returns the batch's mean loss.
    pub fn update(&mut self, buffer: &ReplayBuffer<Experience>) -> Result<f64, LearnerError> {
        let batch = buffer.sample_newest(self.recent_window, self.batch_size, &mut self.rng)?;
        match &mut self.predictor {
            OpponentPredictor::Constant(_) => Ok(0.0),
            OpponentPredictor::Network(net) => {
                let pairs: Vec<(u8, usize)> = batch.iter().map(|e| (e.state, e.opp_action.index())).collect();
                Ok(cross_entropy_step(net, &pairs, self.learning_rate)?)
            }
        }
    }

    /// Fraction of experiences whose opponent action is the model's argmax.
    pub fn accuracy<'a>(&self, experiences: impl IntoIterator<Item = &'a Experience>) -> Result<f64, NeuralError> {
        let (mut hit, mut n) = (0usize, 0usize);
        for e in experiences {
            n += 1;
            if argmax(&self.predict(e.state)?) == e.opp_action.index() {
                hit += 1;
            }
        }
        Ok(if n == 0 { 0.0 } else { hit as f64 / n as f64 })
    }
}

/// Mean `-log softmax(f(s))[class]` over `batch`, one SGD step. Samples that
/// share a state share one backward pass.
pub fn cross_entropy_step(net: &mut Mlp, batch: &[(u8, usize)], lr: f64) -> Result<f64, NeuralError> {
    if batch.is_empty() {
        return Ok(0.0);
    }
    let mut counts = vec![[0usize; 2]; NUM_STATES];
    for &(s, c) in batch {
        if c > 1 {
            return Err(NeuralError::IndexOutOfRange(c));
        }
        counts[s as usize][c] += 1;
    }
    let n = batch.len() as f64;
    let mut grad = Gradient::zeros_like(net);
    let mut acts = Activations::default();
    let mut loss = 0.0;
    for (s, cnt) in counts.iter().enumerate() {
        let total = cnt[0] + cnt[1];
        if total == 0 {
            continue;
        }
        net.forward_into(&observation_from_index(s as u8), &mut acts)?;
        let p = softmax(acts.output());
        let mut og = vec![0.0; 2];
        for c in 0..2 {
            og[c] = (total as f64 * p[c] - cnt[c] as f64) / n;
            loss -= cnt[c] as f64 * p[c].max(1e-300).ln() / n;
        }
        net.accumulate_backward(&acts, &og, &mut grad);
    }
    net.apply_gradient(&grad, lr)?;
    Ok(loss)
}
