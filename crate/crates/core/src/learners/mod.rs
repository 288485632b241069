//! Replay, exploration and the value-based baseline learners.

pub mod buffer;
pub mod checkpoint;
pub use checkpoint::{learner_to_bytes, restore_learner};
pub mod opponent;
pub mod qlearner;
pub mod schedule;
pub mod td;

pub use buffer::{buffer_sample, buffer_store, ReplayBuffer};
pub use opponent::{OpponentModel, OpponentPredictor};
pub use qlearner::{
    select_action, BackendKind, LearnerConfig, LearnerKind, QLearner,
};
pub use schedule::EpsilonSchedule;
pub use td::{td_update, Experience, TdSample};
