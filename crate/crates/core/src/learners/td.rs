use crate::error::NeuralError;
use crate::game::{observation_from_index, Action, Reward, Transition, NUM_STATES};
use crate::neural::{QFunction, RegressionTarget};

/// One stored transition. States are kept as their 8-bit history index;
/// [`observation_from_index`] recovers the vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Experience {
    pub state: u8,
    pub action: Action,
    pub reward: Reward,
    pub next_state: u8,
    pub opp_action: Action,
}

impl Experience {
    pub fn from_transition(t: &Transition) -> Self {
        Experience {
            state: t.state.state_index(),
            action: t.action,
            reward: t.reward,
            next_state: t.next_state.state_index(),
            opp_action: t.opp_action,
        }
    }

    pub fn td_sample(&self) -> TdSample {
        TdSample {
            state: self.state,
            action: self.action.index(),
            reward: f64::from(self.reward),
            next_state: self.next_state,
        }
    }
}

/// A regression sample for the TD update: real-valued reward, successor
/// state to bootstrap from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TdSample {
    pub state: u8,
    pub action: usize,
    pub reward: f64,
    pub next_state: u8,
}

const UNSEEN: u16 = u16::MAX;

/// One optimisation step on the mean squared TD error with targets
/// `r + gamma * max_a' target(s', a')`. `encode` maps a state index to the
/// network input; it must depend on the state only, which lets samples that
/// share a state share a forward and backward pass.
pub fn td_update<Q: QFunction>(
    online: &mut Q,
    target: &Q,
    batch: &[TdSample],
    gamma: f64,
    lr: f64,
    encode: &mut dyn FnMut(u8) -> Result<Vec<f64>, NeuralError>,
) -> Result<(), NeuralError> {
    let mut slot = [UNSEEN; NUM_STATES];
    let mut inputs: Vec<Vec<f64>> = Vec::new();
    let mut bootstrap: [Option<f64>; NUM_STATES] = [None; NUM_STATES];
    let mut samples = Vec::with_capacity(batch.len());
    for s in batch {
        let v = match bootstrap[s.next_state as usize] {
            Some(v) => v,
            None => {
                let q = target.q_values(&encode(s.next_state)?)?;
                let v = q[0].max(q[1]);
                bootstrap[s.next_state as usize] = Some(v);
                v
            }
        };
        let k = &mut slot[s.state as usize];
        if *k == UNSEEN {
            *k = inputs.len() as u16;
            inputs.push(encode(s.state)?);
        }
        samples.push(RegressionTarget {
            input: *k as usize,
            action: s.action,
            target: s.reward + gamma * v,
        });
    }
    online.regress(&inputs, &samples, lr)
}

/// The plain 8-d observation encoder.
pub fn plain_input(state: u8) -> Result<Vec<f64>, NeuralError> {
    Ok(observation_from_index(state).to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::TabularQ;

    #[test]
    fn myopic_tabular_step() {
        let mut q = TabularQ::new(1.0);
        let t = q.clone();
        let batch = [TdSample { state: 4, action: 1, reward: 5.0, next_state: 9 }];
        td_update(&mut q, &t, &batch, 0.0, 1.0, &mut plain_input).unwrap();
        assert_eq!(q.table[4][1], 5.0);
    }

    #[test]
    fn two_state_chain_fixed_point() {
        // State 0 -> state 1 with reward 0; state 1 -> state 1 with reward 1.
        // Fixed point: Q(1) = 1 / (1 - g), Q(0) = g / (1 - g).
        let g = 0.99;
        let mut q = TabularQ::new(0.5);
        for _ in 0..10_000 {
            let t = q.clone();
            let batch = [
                TdSample { state: 0, action: 0, reward: 0.0, next_state: 1 },
                TdSample { state: 1, action: 0, reward: 1.0, next_state: 1 },
                TdSample { state: 0, action: 1, reward: 0.0, next_state: 1 },
                TdSample { state: 1, action: 1, reward: 1.0, next_state: 1 },
            ];
            td_update(&mut q, &t, &batch, g, 0.5, &mut plain_input).unwrap();
        }
        assert!((q.table[1][0] - 100.0).abs() < 1e-6);
        assert!((q.table[0][0] - 99.0).abs() < 1e-6);
    }
}
