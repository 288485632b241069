use serde::{Deserialize, Serialize};

/// Linear exploration decay: `max(end, start - (start - end) * t / decay_steps)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub decay_steps: u64,
}

impl Default for EpsilonSchedule {
    fn default() -> Self {
        EpsilonSchedule {
            start: 1.0,
            end: 0.1,
            decay_steps: 1,
        }
    }
}

impl EpsilonSchedule {
    pub fn new(start: f64, end: f64, decay_steps: u64) -> Self {
        EpsilonSchedule {
            start,
            end,
            decay_steps: decay_steps.max(1),
        }
    }

    /// Decays over 90% of `total_steps`.
    pub fn for_total_steps(start: f64, end: f64, total_steps: u64) -> Self {
        EpsilonSchedule::new(start, end, (total_steps * 9 / 10).max(1))
    }

    pub fn value(&self, t: u64) -> f64 {
        let frac = t as f64 / self.decay_steps.max(1) as f64;
        (self.start - (self.start - self.end) * frac).max(self.end)
    }
}
