use std::path::PathBuf;

use thiserror::Error;

use crate::game::Reward;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GameError {
    #[error("payoff ordering T > R > P > S violated (T={t}, R={r}, P={p}, S={s})")]
    OrderingViolation { t: Reward, r: Reward, p: Reward, s: Reward },
    #[error("payoff sociality 2R > T + S violated (T={t}, R={r}, S={s})")]
    SocialityViolation { t: Reward, r: Reward, s: Reward },
    #[error("agent `{agent}` produced no action in round {round}")]
    AgentFailure { agent: String, round: usize },
    #[error("a match needs at least one step")]
    InvalidSteps,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NeuralError {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("non-finite gradient component at parameter {index}")]
    NonFiniteGradient { index: usize },
    #[error("non-finite parameter {index} after update")]
    NonFiniteParameter { index: usize },
    #[error("state index {0} out of range")]
    IndexOutOfRange(usize),
    #[error("observation is not a binary history vector: {0}")]
    InvalidObservation(String),
    #[error("invalid checkpoint: {0}")]
    BadCheckpoint(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LearnerError {
    #[error("replay buffer is empty")]
    EmptyBuffer,
    #[error("reward group {0} holds no experiences")]
    EmptyGroup(usize),
    #[error("reward {0} is not an outcome of the payoff matrix")]
    UnknownReward(Reward),
    #[error(transparent)]
    Neural(#[from] NeuralError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ArenaError {
    #[error("roster needs at least two agents, got {0}")]
    RosterTooSmall(usize),
    #[error("unknown agent kind `{0}`")]
    UnknownKind(String),
    #[error("duplicate agent id `{0}`")]
    DuplicateId(String),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Learner(#[from] LearnerError),
}

impl From<NeuralError> for ArenaError {
    fn from(e: NeuralError) -> Self {
        ArenaError::Learner(e.into())
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid value at `{path}`: {message}")]
    Validation { path: String, message: String },
}

impl ConfigError {
    pub(crate) fn invalid(path: &str, message: impl Into<String>) -> Self {
        ConfigError::Validation {
            path: path.to_string(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Arena(#[from] ArenaError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("metrics schema mismatch: {0}")]
    SchemaMismatch(String),
}

impl RunError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        RunError::Io {
            path: path.into(),
            source,
        }
    }
}
