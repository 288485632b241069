use rand::Rng;

use crate::error::LearnerError;
use crate::game::PayoffMatrix;
use crate::learners::{Experience, ReplayBuffer};

/// Number of distinct reward outcomes, and so of sub-buffers.
pub const NUM_GROUPS: usize = 4;

/// One FIFO sub-buffer per reward outcome, ordered `[S, P, R, T]`.
#[derive(Clone, Debug, PartialEq)]
pub struct RewardGroupedBuffer {
    payoff: PayoffMatrix,
    groups: [ReplayBuffer<Experience>; NUM_GROUPS],
}

impl RewardGroupedBuffer {
    pub fn new(payoff: PayoffMatrix, capacity: usize) -> Self {
        RewardGroupedBuffer {
            payoff,
            groups: std::array::from_fn(|_| ReplayBuffer::new(capacity)),
        }
    }

    pub fn store(&mut self, e: Experience) -> Result<usize, LearnerError> {
        let g = self
            .payoff
            .outcome_index(e.reward)
            .ok_or(LearnerError::UnknownReward(e.reward))?;
        self.groups[g].store(e);
        Ok(g)
    }

    pub fn group(&self, g: usize) -> &ReplayBuffer<Experience> {
        &self.groups[g]
    }

    /// Occupancy of each group.
    pub fn sizes(&self) -> [usize; NUM_GROUPS] {
        std::array::from_fn(|g| self.groups[g].len())
    }

    pub fn len(&self) -> usize {
        self.sizes().iter().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn sample<R: Rng>(&self, g: usize, n: usize, rng: &mut R) -> Result<Vec<Experience>, LearnerError> {
        let buf = self.groups.get(g).ok_or(LearnerError::EmptyGroup(g))?;
        if buf.is_empty() {
            return Err(LearnerError::EmptyGroup(g));
        }
        buf.sample(n, rng)
    }

    /// The first non-empty group at or after `from`, cycling.
    pub fn next_non_empty(&self, from: usize) -> Option<usize> {
        (0..NUM_GROUPS)
            .map(|k| (from + k) % NUM_GROUPS)
            .find(|&g| !self.groups[g].is_empty())
    }
}
