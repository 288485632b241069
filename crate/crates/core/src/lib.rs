//! Iterated prisoner's dilemma research engine: static Axelrod-style
//! strategies, deep-Q and Hyper-Q learners, the probe/player learner, and
//! tournament, head-to-head and society experiments.

pub mod arena;
pub mod config;
pub mod error;
pub mod game;
pub mod learners;
pub mod ltp;
pub mod neural;
pub mod rng;
pub mod run;
pub mod strategies;

pub use error::{ArenaError, ConfigError, GameError, LearnerError, NeuralError, RunError};
pub use game::{Action, HistoryWindow, MatchConfig, MatchResult, PayoffMatrix};
