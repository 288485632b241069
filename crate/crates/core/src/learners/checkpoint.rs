//! Learner checkpoints: a 32-byte header followed by length-prefixed network
//! or table blobs in the neural checkpoint formats.
//!
//! | bytes | field |
//! |-------|-------|
//! | 0..4  | magic `PALC` |
//! | 4..6  | version (u16) |
//! | 6..8  | learner kind: 0 = Q, 1 = Hyper-Q (u16) |
//! | 8..16 | environment step count (u64) |
//! | 16..24 | gradient update count (u64) |
//! | 24..32 | exploration decay steps (u64) |
//!
//! then the exploration start and end values (f64), the online and target
//! Q-functions, and for Hyper-Q the opponent network.

use crate::error::NeuralError;
use crate::learners::opponent::OpponentPredictor;
use crate::learners::qlearner::{LearnerKind, QLearner};
use crate::learners::schedule::EpsilonSchedule;
use crate::neural::checkpoint::{read_backend, write_backend, Reader, FORMAT_VERSION};
use crate::neural::QBackend;

pub const LEARNER_MAGIC: [u8; 4] = *b"PALC";

fn bad(msg: &str) -> NeuralError {
    NeuralError::BadCheckpoint(msg.to_string())
}

pub fn learner_to_bytes(l: &QLearner) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&LEARNER_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    let kind: u16 = match l.kind() {
        LearnerKind::Q => 0,
        LearnerKind::HyperQ => 1,
    };
    out.extend_from_slice(&kind.to_le_bytes());
    out.extend_from_slice(&l.step_count.to_le_bytes());
    out.extend_from_slice(&l.updates.to_le_bytes());
    out.extend_from_slice(&l.epsilon.decay_steps.to_le_bytes());
    out.extend_from_slice(&l.epsilon.start.to_le_bytes());
    out.extend_from_slice(&l.epsilon.end.to_le_bytes());
    write_backend(&mut out, &l.online);
    write_backend(&mut out, &l.target.params);
    if let Some(m) = &l.opponent {
        if let OpponentPredictor::Network(net) = &m.predictor {
            write_backend(&mut out, &QBackend::Neural(net.clone()));
        }
    }
    out
}

/// Restores parameters, counters and exploration state into `l`, which must
/// have been built with the same kind and shapes. The replay buffer is not
/// part of a checkpoint.
pub fn restore_learner(l: &mut QLearner, bytes: &[u8]) -> Result<(), NeuralError> {
    let mut r = Reader::new(bytes);
    if r.take(4)? != LEARNER_MAGIC {
        return Err(bad("not a learner checkpoint"));
    }
    if r.u16()? != FORMAT_VERSION {
        return Err(bad("unsupported version"));
    }
    let kind = match r.u16()? {
        0 => LearnerKind::Q,
        1 => LearnerKind::HyperQ,
        _ => return Err(bad("unknown learner kind")),
    };
    if kind != l.kind() {
        return Err(bad("learner kind differs"));
    }
    let step_count = r.u64()?;
    let updates = r.u64()?;
    let decay = r.u64()?;
    let start = r.f64()?;
    let end = r.f64()?;
    let online = read_backend(&mut r)?;
    let target = read_backend(&mut r)?;
    use crate::neural::QFunction;
    if !online.same_shape(&l.online) || !target.same_shape(&l.online) {
        return Err(bad("network shape differs"));
    }
    let opponent = match &l.opponent {
        Some(m) if matches!(m.predictor, OpponentPredictor::Network(_)) => match read_backend(&mut r)? {
            QBackend::Neural(net) => Some(net),
            QBackend::Tabular(_) => return Err(bad("opponent model must be a network")),
        },
        _ => None,
    };
    if !r.rest().is_empty() {
        return Err(bad("trailing bytes"));
    }
    l.step_count = step_count;
    l.updates = updates;
    l.epsilon = EpsilonSchedule::new(start, end, decay);
    l.online = online;
    l.target.params = target;
    if let (Some(m), Some(net)) = (&mut l.opponent, opponent) {
        m.predictor = OpponentPredictor::Network(net);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{play_match, MatchConfig};
    use crate::learners::LearnerConfig;
    use crate::strategies::{make_strategy, StrategyKind};

    #[test]
    fn round_trip_hyper_q() {
        let cfg = LearnerConfig {
            batch_size: 8,
            target_sync: 7,
            ..LearnerConfig::default()
        };
        let mut a = QLearner::new("a", LearnerKind::HyperQ, &cfg, 1000, 3);
        let mut opp = make_strategy(StrategyKind::TitForTat, 0);
        play_match(&mut a, &mut opp, &MatchConfig::tournament(0), true).unwrap();
        let bytes = learner_to_bytes(&a);
        let mut b = QLearner::new("b", LearnerKind::HyperQ, &cfg, 1000, 99);
        restore_learner(&mut b, &bytes).unwrap();
        assert_eq!(b.step_count(), 100);
        assert_eq!(b.online(), a.online());
        assert_eq!(b.target(), a.target());
        assert_eq!(b.opponent_model().unwrap().predictor, a.opponent_model().unwrap().predictor);
        assert_eq!(b.epsilon(), a.epsilon());
        let mut q = QLearner::new("q", LearnerKind::Q, &cfg, 1000, 3);
        assert!(restore_learner(&mut q, &bytes).is_err());
    }
}
