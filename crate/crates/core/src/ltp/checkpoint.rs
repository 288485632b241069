//! Probe/player checkpoints.
//!
//! | bytes | field |
//! |-------|-------|
//! | 0..4  | magic `PALT` |
//! | 4..6  | version (u16) |
//! | 6..8  | reserved |
//! | 8..16 | completed cycles (u64) |
//! | 16..24 | probe environment steps (u64) |
//! | 24..32 | player gradient updates (u64) |
//! | 32..64 | reward-group occupancy, `S, P, R, T` order (4 x u64) |
//!
//! then the player's online and target Q-functions and the probe's
//! Q-function as length-prefixed blobs. Buffer contents are not stored.

use crate::error::NeuralError;
use crate::ltp::{LtpAgent, NUM_GROUPS};
use crate::neural::checkpoint::{read_backend, write_backend, Reader, FORMAT_VERSION};
use crate::neural::QFunction;

pub const LTP_MAGIC: [u8; 4] = *b"PALT";

fn bad(msg: &str) -> NeuralError {
    NeuralError::BadCheckpoint(msg.to_string())
}

pub fn ltp_to_bytes(a: &LtpAgent) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&LTP_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&[0, 0]);
    out.extend_from_slice(&(a.cycles_done() as u64).to_le_bytes());
    out.extend_from_slice(&a.probe.steps.to_le_bytes());
    out.extend_from_slice(&a.player.updates().to_le_bytes());
    for n in a.probe.groups.sizes() {
        out.extend_from_slice(&(n as u64).to_le_bytes());
    }
    write_backend(&mut out, &a.player.online);
    write_backend(&mut out, &a.player.target.params);
    write_backend(&mut out, &a.probe.q);
    out
}

/// Stored reward-group occupancy, readable without restoring.
pub fn group_occupancy(bytes: &[u8]) -> Result<[u64; NUM_GROUPS], NeuralError> {
    let mut r = Reader::new(bytes);
    if r.take(4)? != LTP_MAGIC {
        return Err(bad("not a probe/player checkpoint"));
    }
    r.take(28)?;
    let mut occ = [0; NUM_GROUPS];
    for o in &mut occ {
        *o = r.u64()?;
    }
    Ok(occ)
}

/// Restores parameters and counters into `a`, which must have been built with
/// the same shapes.
pub fn restore_ltp(a: &mut LtpAgent, bytes: &[u8]) -> Result<(), NeuralError> {
    let mut r = Reader::new(bytes);
    if r.take(4)? != LTP_MAGIC {
        return Err(bad("not a probe/player checkpoint"));
    }
    if r.u16()? != FORMAT_VERSION {
        return Err(bad("unsupported version"));
    }
    r.take(2)?;
    let cycles = r.u64()?;
    let steps = r.u64()?;
    let updates = r.u64()?;
    for _ in 0..NUM_GROUPS {
        r.u64()?;
    }
    let online = read_backend(&mut r)?;
    let target = read_backend(&mut r)?;
    let probe = read_backend(&mut r)?;
    if !r.rest().is_empty() {
        return Err(bad("trailing bytes"));
    }
    if [&online, &target, &probe].iter().any(|q| !q.same_shape(&a.player.online)) {
        return Err(bad("network shape differs"));
    }
    a.set_cycles_done(cycles as usize);
    a.probe.steps = steps;
    a.probe.q = probe;
    a.player.updates = updates;
    a.player.online = online;
    a.player.target.params = target;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::PayoffMatrix;
    use crate::learners::LearnerConfig;
    use crate::ltp::{ltp_train, LtpConfig, LtpOpponent};
    use crate::strategies::StrategyKind;

    #[test]
    fn round_trip() {
        let cfg = LtpConfig {
            cycles: 3,
            probe_phase_steps: 100,
            rollouts_per_cycle: 8,
            ..LtpConfig::default()
        };
        let lc = LearnerConfig {
            batch_size: 16,
            hidden: vec![6],
            ..LearnerConfig::default()
        };
        let mut a = LtpAgent::new("a", &cfg, &lc, PayoffMatrix::default(), 5);
        ltp_train(&mut a, LtpOpponent::Static(StrategyKind::TitForTat), &mut |_| {}).unwrap();
        let bytes = ltp_to_bytes(&a);
        let occ = group_occupancy(&bytes).unwrap();
        assert_eq!(occ.iter().sum::<u64>(), 300);
        assert_eq!(occ.map(|n| n as usize), a.probe.groups.sizes());

        let mut b = LtpAgent::new("a", &cfg, &lc, PayoffMatrix::default(), 99);
        restore_ltp(&mut b, &bytes).unwrap();
        assert_eq!(b.cycles_done(), 3);
        assert_eq!(b.player.online, a.player.online);
        assert_eq!(b.player.target.params, a.player.target.params);
        assert_eq!(b.probe.q, a.probe.q);
        assert_eq!(ltp_to_bytes(&b)[..32], bytes[..32]);

        let mut t = bytes.clone();
        t.push(0);
        assert!(restore_ltp(&mut b, &t).is_err());
        assert!(restore_ltp(&mut b, &bytes[..40]).is_err());
    }
}
