//! The probe/player learner. A probe explores and keeps its experience
//! grouped by reward outcome; short co-adaptive rollouts between probes
//! measure how a behavioural shift plays out, and the player trains on the
//! discounted rollout returns. The player's policy is copied back into the
//! probe after every cycle.

pub mod agent;
pub mod buffer;
pub mod checkpoint;
pub mod rollout;

use serde::{Deserialize, Serialize};

pub use agent::{ltp_train, sync_player_to_probe, train_player, CycleRecord, LtpAgent, LtpOpponent, Player, Probe};
pub use buffer::{RewardGroupedBuffer, NUM_GROUPS};
pub use checkpoint::{group_occupancy, ltp_to_bytes, restore_ltp};
pub use rollout::{
    adjust_reward, adjusted_reward_in_bounds, coadaptive_rollout, emit_adjusted_experience, horizon_weight,
    probe_group_update, AdjustedExperience, RolloutParams, RolloutResult, Trajectory, TrajectoryStep,
};

/// Where a probe's one-step update before a rollout draws its batch from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeUpdateSource {
    /// The probe's own reward groups, cycling through them across rollouts.
    #[default]
    OwnGroups,
    /// The opposing probe's reward groups. Against a static opponent this
    /// falls back to the probe's own groups.
    OpponentBuffer,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LtpConfig {
    /// Weight on rewards earned after successive opponent adaptations.
    pub eta: f64,
    /// Rollout length.
    pub horizon: usize,
    /// Environment steps of probe exploration per cycle.
    pub probe_phase_steps: usize,
    pub rollouts_per_cycle: usize,
    pub cycles: usize,
    /// Player gradient steps per cycle.
    pub player_steps_per_cycle: usize,
    /// Capacity of each reward group.
    pub group_capacity: usize,
    /// Length of exploration and evaluation matches.
    pub match_steps: usize,
    /// Greedy evaluation matches per cycle.
    pub eval_matches: usize,
    /// Step size of in-rollout updates; defaults to the probe's learning rate.
    pub rollout_learning_rate: Option<f64>,
    /// Exploration on the opening move of each rollout; defaults to the
    /// probe's current ε. A fixed value keeps both opening actions measured
    /// after the probe's schedule has decayed.
    pub rollout_first_move_epsilon: Option<f64>,
    pub probe_update_source: ProbeUpdateSource,
    /// Keep in-rollout updates in the probe instead of discarding them.
    pub persist_rollout_updates: bool,
    /// Divide the adjusted reward by `sum eta^(t-1)` before the player sees
    /// it, putting player values on the same per-step scale as the rollout
    /// copies' raw-reward targets. Preserves the ordering of actions.
    pub normalize_adjusted_reward: bool,
}

impl Default for LtpConfig {
    fn default() -> Self {
        LtpConfig {
            eta: 0.99,
            horizon: 5,
            probe_phase_steps: 2_000,
            rollouts_per_cycle: 64,
            cycles: 200,
            player_steps_per_cycle: 10,
            group_capacity: 25_000,
            match_steps: 20,
            eval_matches: 20,
            rollout_learning_rate: None,
            rollout_first_move_epsilon: None,
            probe_update_source: ProbeUpdateSource::OwnGroups,
            persist_rollout_updates: false,
            normalize_adjusted_reward: false,
        }
    }
}
