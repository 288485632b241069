use crate::error::NeuralError;
use crate::game::{NUM_STATES, OBS_DIM};

/// One Q-value per (history state, action) over the 256 observation states.
#[derive(Clone, Debug, PartialEq)]
pub struct TabularQ {
    pub table: Vec<[f64; 2]>,
    pub learning_rate: f64,
}

impl TabularQ {
    pub fn new(learning_rate: f64) -> Self {
        TabularQ {
            table: vec![[0.0; 2]; NUM_STATES],
            learning_rate,
        }
    }

    pub fn get(&self, state: usize) -> Result<[f64; 2], NeuralError> {
        self.table
            .get(state)
            .copied()
            .ok_or(NeuralError::IndexOutOfRange(state))
    }

    /// `q[s, a] += lr * (target - q[s, a])`.
    pub fn update(&mut self, state: usize, action: usize, target: f64, lr: f64) -> Result<(), NeuralError> {
        let row = self
            .table
            .get_mut(state)
            .ok_or(NeuralError::IndexOutOfRange(state))?;
        let q = row.get_mut(action).ok_or(NeuralError::IndexOutOfRange(action))?;
        *q += lr * (target - *q);
        if !q.is_finite() {
            return Err(NeuralError::NonFiniteParameter { index: state * 2 + action });
        }
        Ok(())
    }
}

pub fn tabular_lookup_update(
    q: &TabularQ,
    state_index: usize,
    action: usize,
    td_target: f64,
) -> Result<TabularQ, NeuralError> {
    let mut next = q.clone();
    next.update(state_index, action, td_target, q.learning_rate)?;
    Ok(next)
}

/// Reads an 8-d binary observation back as its state index.
pub fn state_index_of(x: &[f64]) -> Result<usize, NeuralError> {
    if x.len() != OBS_DIM {
        return Err(NeuralError::DimensionMismatch {
            expected: OBS_DIM,
            actual: x.len(),
        });
    }
    x.iter().try_fold(0usize, |acc, &v| {
        if v == 0.0 || v == 1.0 {
            Ok((acc << 1) | v as usize)
        } else {
            Err(NeuralError::InvalidObservation(format!("component {v}")))
        }
    })
}
