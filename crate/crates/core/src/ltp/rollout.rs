use rand::Rng;

use crate::error::LearnerError;
use crate::game::{observation_from_index, Action, HistoryWindow, PayoffMatrix, Reward};
use crate::learners::td::plain_input;
use crate::learners::{select_action, td_update, TdSample};
use crate::ltp::buffer::RewardGroupedBuffer;
use crate::neural::{argmax, QBackend, QFunction};

/// One round of a rollout from one player's side.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TrajectoryStep {
    pub state: u8,
    pub action: Action,
    pub reward: Reward,
    pub next_state: u8,
}

impl TrajectoryStep {
    fn td_sample(&self) -> TdSample {
        TdSample {
            state: self.state,
            action: self.action.index(),
            reward: f64::from(self.reward),
            next_state: self.next_state,
        }
    }
}

/// `(s0, a0, r1, s1, ..., s_{T-1}, a_{T-1}, r_T, s_T)`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Trajectory {
    pub steps: Vec<TrajectoryStep>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Whether each step starts where the previous one ended.
    pub fn is_chained(&self) -> bool {
        self.steps.windows(2).all(|w| w[0].next_state == w[1].state)
    }
}

/// The training record a trajectory leaves behind: its first move, the
/// discounted rollout return and the state right after the first move.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdjustedExperience {
    pub state: u8,
    pub action: Action,
    pub adjusted_reward: f64,
    pub next_state: u8,
}

impl AdjustedExperience {
    pub fn td_sample(&self) -> TdSample {
        TdSample {
            state: self.state,
            action: self.action.index(),
            reward: self.adjusted_reward,
            next_state: self.next_state,
        }
    }
}

/// `sum_{t=1..T} eta^(t-1) * r_t`.
pub fn adjust_reward(tau: &Trajectory, eta: f64) -> f64 {
    let mut weight = 1.0;
    let mut total = 0.0;
    for s in &tau.steps {
        total += weight * f64::from(s.reward);
        weight *= eta;
    }
    total
}

/// `sum_{t=1..T} eta^(t-1)`, the scale of the adjusted-reward bounds.
pub fn horizon_weight(eta: f64, horizon: usize) -> f64 {
    (0..horizon).map(|t| eta.powi(t as i32)).sum()
}

pub fn emit_adjusted_experience(tau: &Trajectory, eta: f64) -> Option<AdjustedExperience> {
    let first = tau.steps.first()?;
    Some(AdjustedExperience {
        state: first.state,
        action: first.action,
        adjusted_reward: adjust_reward(tau, eta),
        next_state: first.next_state,
    })
}

/// Whether `r` lies within `[S, T] * sum eta^(t-1)` for a `horizon`-step rollout.
pub fn adjusted_reward_in_bounds(r: f64, eta: f64, horizon: usize, payoff: &PayoffMatrix) -> bool {
    let g = horizon_weight(eta, horizon);
    let slack = 1e-9 * (1.0 + g * f64::from(payoff.temptation));
    r >= g * f64::from(payoff.sucker) - slack && r <= g * f64::from(payoff.temptation) + slack
}

/// One TD step on a batch drawn from reward group `group`, bootstrapping
/// from the pre-update function.
pub fn probe_group_update<R: Rng>(
    q: &mut QBackend,
    groups: &RewardGroupedBuffer,
    group: usize,
    batch_size: usize,
    gamma: f64,
    lr: f64,
    rng: &mut R,
) -> Result<(), LearnerError> {
    let batch: Vec<TdSample> = groups
        .sample(group, batch_size, rng)?
        .iter()
        .map(|e| e.td_sample())
        .collect();
    let frozen = q.clone();
    td_update(q, &frozen, &batch, gamma, lr, &mut plain_input)?;
    Ok(())
}

/// Settings of a co-adaptive rollout.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RolloutParams {
    pub horizon: usize,
    pub gamma: f64,
    /// Step size of the per-round TD updates made during the rollout.
    pub learning_rate: f64,
    /// Exploration on the first move of each side; later moves are greedy.
    pub first_move_epsilon: [f64; 2],
    pub payoff: PayoffMatrix,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RolloutResult {
    pub trajectory_a: Trajectory,
    pub trajectory_b: Trajectory,
    /// The working copies after their in-rollout updates.
    pub adapted_a: QBackend,
    pub adapted_b: QBackend,
}

fn single_step(q: &mut QBackend, step: &TrajectoryStep, gamma: f64, lr: f64) -> Result<(), LearnerError> {
    if lr == 0.0 {
        return Ok(());
    }
    let frozen = q.clone();
    td_update(q, &frozen, &[step.td_sample()], gamma, lr, &mut plain_input)?;
    Ok(())
}

fn choose<R: Rng>(q: &QBackend, state: u8, epsilon: f64, rng: &mut R) -> Result<Action, LearnerError> {
    let values = q.q_values(&observation_from_index(state))?;
    let a = if epsilon > 0.0 {
        select_action(values, epsilon, rng)
    } else {
        argmax(&values)
    };
    Ok(Action::from_index(a).expect("two actions"))
}

/// Plays `horizon` rounds between working copies of `a` and `b`, each
/// taking one TD step on its own transition after every round. The inputs
/// are not modified.
pub fn coadaptive_rollout<R: Rng>(
    a: &QBackend,
    b: &QBackend,
    start: HistoryWindow,
    params: &RolloutParams,
    rng: &mut R,
) -> Result<RolloutResult, LearnerError> {
    let mut qa = a.clone();
    let mut qb = b.clone();
    let mut history = start;
    let mut ta = Trajectory::default();
    let mut tb = Trajectory::default();
    for t in 0..params.horizon {
        let (eps_a, eps_b) = if t == 0 {
            (params.first_move_epsilon[0], params.first_move_epsilon[1])
        } else {
            (0.0, 0.0)
        };
        let view_b = history.swapped();
        let act_a = choose(&qa, history.state_index(), eps_a, rng)?;
        let act_b = choose(&qb, view_b.state_index(), eps_b, rng)?;
        let (r_a, r_b) = params.payoff.payoff(act_a, act_b);
        let next = history.push_round(act_a, act_b);
        let step_a = TrajectoryStep {
            state: history.state_index(),
            action: act_a,
            reward: r_a,
            next_state: next.state_index(),
        };
        let step_b = TrajectoryStep {
            state: view_b.state_index(),
            action: act_b,
            reward: r_b,
            next_state: next.swapped().state_index(),
        };
        single_step(&mut qa, &step_a, params.gamma, params.learning_rate)?;
        single_step(&mut qb, &step_b, params.gamma, params.learning_rate)?;
        ta.steps.push(step_a);
        tb.steps.push(step_b);
        history = next;
    }
    Ok(RolloutResult {
        trajectory_a: ta,
        trajectory_b: tb,
        adapted_a: qa,
        adapted_b: qb,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::Action::{Cooperate as C, Defect as D};
    use crate::neural::{Mlp, TabularQ};

    fn tau(rewards: &[Reward]) -> Trajectory {
        Trajectory {
            steps: rewards
                .iter()
                .enumerate()
                .map(|(i, &r)| TrajectoryStep {
                    state: i as u8,
                    action: if r == 5 { D } else { C },
                    reward: r,
                    next_state: i as u8 + 1,
                })
                .collect(),
        }
    }

    #[test]
    fn adjusted_reward_arithmetic() {
        assert_eq!(adjust_reward(&tau(&[5, 1, 1, 1, 1]), 0.0), 5.0);
        assert_eq!(adjust_reward(&tau(&[3; 5]), 1.0), 15.0);
        assert!((adjust_reward(&tau(&[5, 1, 1, 1, 1]), 0.5) - 5.9375).abs() < 1e-12);
        assert!((adjust_reward(&tau(&[3; 5]), 0.5) - 5.8125).abs() < 1e-12);
        // 5 + 0.99 + 0.99^2 + 0.99^3 + 0.99^4 and 3 * (1 - 0.99^5) / 0.01.
        assert!((adjust_reward(&tau(&[5, 1, 1, 1, 1]), 0.99) - 8.90099501).abs() < 1e-9);
        assert!((adjust_reward(&tau(&[3; 5]), 0.99) - 14.70298503).abs() < 1e-9);
    }

    #[test]
    fn emission() {
        let t = tau(&[5, 1, 1]);
        let e = emit_adjusted_experience(&t, 0.0).unwrap();
        assert_eq!((e.state, e.action, e.adjusted_reward, e.next_state), (0, D, 5.0, 1));
        let single = tau(&[3]);
        assert_eq!(emit_adjusted_experience(&single, 0.7).unwrap().adjusted_reward, 3.0);
        assert!(emit_adjusted_experience(&Trajectory::default(), 0.5).is_none());
        assert!(t.is_chained());
    }

    #[test]
    fn rollout_leaves_inputs_untouched() {
        let a = QBackend::Neural(Mlp::new(&[8, 40, 40, 2], 1));
        let b = QBackend::Neural(Mlp::new(&[8, 40, 40, 2], 2));
        let (a0, b0) = (a.clone(), b.clone());
        let params = RolloutParams {
            horizon: 5,
            gamma: 0.99,
            learning_rate: 0.01,
            first_move_epsilon: [0.5, 0.5],
            payoff: PayoffMatrix::default(),
        };
        let mut rng = crate::rng::stream(0, &[]);
        let r = coadaptive_rollout(&a, &b, HistoryWindow::new(), &params, &mut rng).unwrap();
        assert_eq!(a, a0);
        assert_eq!(b, b0);
        assert_ne!(r.adapted_a, a0);
        assert_eq!(r.trajectory_a.len(), 5);
        assert!(r.trajectory_a.is_chained() && r.trajectory_b.is_chained());
    }

    #[test]
    fn zero_rate_rollout_is_fixed_policy_play() {
        // A always defects, B always cooperates: every round pays (5, 0).
        let mut qa = TabularQ::new(0.0);
        let mut qb = TabularQ::new(0.0);
        for s in 0..256 {
            qa.table[s] = [0.0, 1.0];
            qb.table[s] = [1.0, 0.0];
        }
        let params = RolloutParams {
            horizon: 5,
            gamma: 0.99,
            learning_rate: 0.0,
            first_move_epsilon: [0.0, 0.0],
            payoff: PayoffMatrix::default(),
        };
        let mut rng = crate::rng::stream(0, &[]);
        let r = coadaptive_rollout(&QBackend::Tabular(qa), &QBackend::Tabular(qb), HistoryWindow::new(), &params, &mut rng)
            .unwrap();
        assert!(r.trajectory_a.steps.iter().all(|s| s.reward == 5));
        assert!(r.trajectory_b.steps.iter().all(|s| s.reward == 0));
    }
}
