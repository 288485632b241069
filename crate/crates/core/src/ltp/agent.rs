use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{ArenaError, LearnerError, NeuralError};
use crate::game::{observation_from_index, play_match, Action, Agent, HistoryWindow, MatchConfig, PayoffMatrix};
use crate::learners::td::plain_input;
use crate::learners::{select_action, td_update, EpsilonSchedule, Experience, LearnerConfig, ReplayBuffer};
use crate::ltp::buffer::RewardGroupedBuffer;
use crate::ltp::rollout::{
    adjusted_reward_in_bounds, coadaptive_rollout, emit_adjusted_experience, horizon_weight, probe_group_update,
    AdjustedExperience,
    RolloutParams, Trajectory, TrajectoryStep,
};
use crate::ltp::{LtpConfig, ProbeUpdateSource, NUM_GROUPS};
use crate::neural::{argmax, QBackend, QFunction, TargetNetwork};
use crate::strategies::{StaticAgent, StrategyKind};

/// The exploring half of the agent.
#[derive(Clone, Debug)]
pub struct Probe {
    pub q: QBackend,
    pub groups: RewardGroupedBuffer,
    pub epsilon: EpsilonSchedule,
    pub steps: u64,
    /// Group the next pre-rollout update starts searching from.
    pub next_group: usize,
    act_rng: ChaCha8Rng,
}

impl Probe {
    pub fn epsilon_now(&self) -> f64 {
        self.epsilon.value(self.steps)
    }

    fn act(&mut self, view: &HistoryWindow) -> Result<Action, NeuralError> {
        let q = self.q.q_values(&view.observation())?;
        let eps = self.epsilon_now();
        Ok(Action::from_index(select_action(q, eps, &mut self.act_rng)).expect("two actions"))
    }

    fn greedy(&self, view: &HistoryWindow) -> Result<Action, NeuralError> {
        let q = self.q.q_values(&view.observation())?;
        Ok(Action::from_index(argmax(&q)).expect("two actions"))
    }
}

/// The half that is trained on adjusted experience and used at test time.
#[derive(Clone, Debug)]
pub struct Player {
    pub online: QBackend,
    pub target: TargetNetwork<QBackend>,
    pub buffer: ReplayBuffer<AdjustedExperience>,
    gamma: f64,
    learning_rate: f64,
    batch_size: usize,
    sample_rng: ChaCha8Rng,
    pub(crate) updates: u64,
}

impl Player {
    pub fn new(online: QBackend, cfg: &LearnerConfig, seed: u64) -> Self {
        Player {
            target: TargetNetwork::new(&online, cfg.target_sync),
            online,
            buffer: ReplayBuffer::new(cfg.buffer_capacity),
            gamma: cfg.gamma,
            learning_rate: cfg.learning_rate,
            batch_size: cfg.batch_size,
            sample_rng: crate::rng::stream(seed, &[2]),
            updates: 0,
        }
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size
    }

    pub fn ingest(&mut self, e: AdjustedExperience) {
        self.buffer.store(e);
    }

    pub fn q_values(&self, state: u8) -> Result<[f64; 2], NeuralError> {
        self.online.q_values(&observation_from_index(state))
    }

    pub fn greedy(&self, state: u8) -> Result<Action, NeuralError> {
        Ok(Action::from_index(argmax(&self.q_values(state)?)).expect("two actions"))
    }
}

/// One TD step of the player toward `R(tau) + gamma * max_a' Q_target(s1, a')`
/// on a uniform batch of adjusted experience.
pub fn train_player(player: &mut Player) -> Result<(), LearnerError> {
    if player.buffer.is_empty() {
        return Err(LearnerError::EmptyBuffer);
    }
    let n = player.batch_size.min(player.buffer.len());
    let batch: Vec<_> = player
        .buffer
        .sample(n, &mut player.sample_rng)?
        .iter()
        .map(AdjustedExperience::td_sample)
        .collect();
    td_update(
        &mut player.online,
        &player.target.params,
        &batch,
        player.gamma,
        player.learning_rate,
        &mut plain_input,
    )?;
    player.updates += 1;
    player.target.after_update(&player.online);
    Ok(())
}

/// Copies the player's parameters into the probe and restarts its group cycle.
pub fn sync_player_to_probe(player: &Player, probe: &mut Probe) -> Result<(), NeuralError> {
    if !player.online.same_shape(&probe.q) {
        return Err(NeuralError::DimensionMismatch {
            expected: QFunction::input_dim(&probe.q),
            actual: QFunction::input_dim(&player.online),
        });
    }
    probe.q = player.online.clone();
    probe.next_group = 0;
    Ok(())
}

/// One line of the per-cycle log.
#[derive(Clone, Debug, PartialEq)]
pub struct CycleRecord {
    pub cycle: usize,
    pub agent_id: String,
    pub eta: f64,
    pub eval_cum_reward: f64,
    pub coop_rate: f64,
    pub adjusted_reward_mean: f64,
}

#[derive(Clone, Debug)]
pub struct LtpAgent {
    id: String,
    pub probe: Probe,
    pub player: Player,
    pub cfg: LtpConfig,
    learner: LearnerConfig,
    payoff: PayoffMatrix,
    rng: ChaCha8Rng,
    seed: u64,
    cycles_done: usize,
}

impl LtpAgent {
    pub fn new(
        id: impl Into<String>,
        cfg: &LtpConfig,
        learner: &LearnerConfig,
        payoff: PayoffMatrix,
        seed: u64,
    ) -> Self {
        let online = learner.backend(crate::game::OBS_DIM, crate::rng::derive_seed(seed, &[0]));
        let planned = (cfg.cycles * cfg.probe_phase_steps) as u64;
        let probe = Probe {
            q: online.clone(),
            groups: RewardGroupedBuffer::new(payoff, cfg.group_capacity),
            epsilon: learner.schedule(planned),
            steps: 0,
            next_group: 0,
            act_rng: crate::rng::stream(seed, &[1]),
        };
        LtpAgent {
            id: id.into(),
            probe,
            player: Player::new(online, learner, seed),
            cfg: cfg.clone(),
            learner: learner.clone(),
            payoff,
            rng: crate::rng::stream(seed, &[4]),
            seed,
            cycles_done: 0,
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn cycles_done(&self) -> usize {
        self.cycles_done
    }

    pub(crate) fn set_cycles_done(&mut self, n: usize) {
        self.cycles_done = n;
    }

    fn rollout_lr(&self) -> f64 {
        self.cfg.rollout_learning_rate.unwrap_or(self.learner.learning_rate)
    }

    fn first_move_epsilon(&self) -> f64 {
        self.cfg.rollout_first_move_epsilon.unwrap_or_else(|| self.probe.epsilon_now())
    }

    /// Hypothetical one-step shift of a working copy of the probe.
    fn shifted_copy(&mut self, source: Option<&RewardGroupedBuffer>) -> Result<QBackend, LearnerError> {
        let mut q = self.probe.q.clone();
        let groups = source.unwrap_or(&self.probe.groups);
        if let Some(g) = groups.next_non_empty(self.probe.next_group) {
            probe_group_update(
                &mut q,
                groups,
                g,
                self.learner.batch_size,
                self.learner.gamma,
                self.learner.learning_rate,
                &mut self.rng,
            )?;
            self.probe.next_group = (g + 1) % crate::ltp::NUM_GROUPS;
        }
        Ok(q)
    }

    fn emit(&mut self, tau: &Trajectory) -> Result<f64, LearnerError> {
        let mut e = emit_adjusted_experience(tau, self.cfg.eta).ok_or(LearnerError::EmptyBuffer)?;
        let raw = e.adjusted_reward;
        assert!(
            adjusted_reward_in_bounds(raw, self.cfg.eta, tau.len(), &self.payoff),
            "adjusted reward {raw} out of bounds"
        );
        if self.cfg.normalize_adjusted_reward {
            e.adjusted_reward /= horizon_weight(self.cfg.eta, tau.len());
        }
        self.player.ingest(e);
        Ok(raw)
    }

    fn train_and_sync(&mut self) -> Result<(), LearnerError> {
        for _ in 0..self.cfg.player_steps_per_cycle {
            if self.player.buffer.len() >= self.player.batch_size() {
                train_player(&mut self.player)?;
            }
        }
        sync_player_to_probe(&self.player, &mut self.probe)?;
        Ok(())
    }

    fn store(&mut self, e: Experience) -> Result<(), LearnerError> {
        self.probe.groups.store(e)?;
        self.probe.steps += 1;
        Ok(())
    }
}

impl Agent for LtpAgent {
    fn label(&self) -> String {
        self.id.clone()
    }

    /// Always the player's greedy move.
    fn decide(&mut self, view: &HistoryWindow, _explore: bool) -> Option<Action> {
        self.player.greedy(view.state_index()).ok()
    }
}

pub enum LtpOpponent<'a> {
    Ltp(&'a mut LtpAgent),
    Static(StrategyKind),
    /// Prober with its end-of-probe test inverted.
    InvertedProber,
}

fn static_agent(kind: Option<StrategyKind>, seed: u64) -> StaticAgent {
    match kind {
        Some(k) => StaticAgent::new(k, seed),
        None => StaticAgent::inverted_prober(seed),
    }
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// Runs `cfg.cycles` training cycles of `agent` against `opponent`, calling
/// `sink` with each agent's record after every cycle.
pub fn ltp_train(
    agent: &mut LtpAgent,
    opponent: LtpOpponent<'_>,
    sink: &mut dyn FnMut(&CycleRecord),
) -> Result<(), ArenaError> {
    match opponent {
        LtpOpponent::Ltp(other) => train_self_play(agent, other, sink),
        LtpOpponent::Static(kind) => train_vs_static(agent, Some(kind), sink),
        LtpOpponent::InvertedProber => train_vs_static(agent, None, sink),
    }
}

fn train_self_play(a: &mut LtpAgent, b: &mut LtpAgent, sink: &mut dyn FnMut(&CycleRecord)) -> Result<(), ArenaError> {
    let cfg = a.cfg.clone();
    let match_cfg = MatchConfig::new(cfg.match_steps, a.payoff, 0)?;
    for _ in 0..cfg.cycles {
        // Exploration phase.
        let mut starts = Vec::with_capacity(cfg.probe_phase_steps);
        let mut history = HistoryWindow::new();
        for step in 0..cfg.probe_phase_steps {
            if step % cfg.match_steps == 0 {
                history = HistoryWindow::new();
            }
            starts.push(history);
            let view_b = history.swapped();
            let act_a = a.probe.act(&history)?;
            let act_b = b.probe.act(&view_b)?;
            let (r_a, r_b) = a.payoff.payoff(act_a, act_b);
            let next = history.push_round(act_a, act_b);
            a.store(Experience {
                state: history.state_index(),
                action: act_a,
                reward: r_a,
                next_state: next.state_index(),
                opp_action: act_b,
            })?;
            b.store(Experience {
                state: view_b.state_index(),
                action: act_b,
                reward: r_b,
                next_state: next.swapped().state_index(),
                opp_action: act_a,
            })?;
            history = next;
        }

        // Rollouts.
        let mut adjusted_a = Vec::with_capacity(cfg.rollouts_per_cycle);
        let mut adjusted_b = Vec::with_capacity(cfg.rollouts_per_cycle);
        for k in 0..cfg.rollouts_per_cycle {
            // Every 16 rollouts pair each of a's groups with each of b's, so
            // the two opening shifts are uncorrelated.
            a.probe.next_group = k % NUM_GROUPS;
            b.probe.next_group = (k + k / NUM_GROUPS) % NUM_GROUPS;
            let start = starts[a.rng.gen_range(0..starts.len())];
            let (qa, qb) = match cfg.probe_update_source {
                ProbeUpdateSource::OwnGroups => (a.shifted_copy(None)?, b.shifted_copy(None)?),
                ProbeUpdateSource::OpponentBuffer => {
                    let ga = a.probe.groups.clone();
                    let qa = a.shifted_copy(Some(&b.probe.groups))?;
                    (qa, b.shifted_copy(Some(&ga))?)
                }
            };
            let params = RolloutParams {
                horizon: cfg.horizon,
                gamma: a.learner.gamma,
                learning_rate: a.rollout_lr(),
                first_move_epsilon: [a.first_move_epsilon(), b.first_move_epsilon()],
                payoff: a.payoff,
            };
            let res = coadaptive_rollout(&qa, &qb, start, &params, &mut a.rng)?;
            adjusted_a.push(a.emit(&res.trajectory_a)?);
            adjusted_b.push(b.emit(&res.trajectory_b)?);
            if cfg.persist_rollout_updates {
                a.probe.q = res.adapted_a;
                b.probe.q = res.adapted_b;
            }
        }

        a.train_and_sync()?;
        b.train_and_sync()?;
        a.cycles_done += 1;
        b.cycles_done += 1;

        // Greedy evaluation between the two players.
        let mut reward = [0.0; 2];
        let mut coop = [0.0; 2];
        for _ in 0..cfg.eval_matches.max(1) {
            let r = play_match(a, b, &match_cfg, false)?;
            reward[0] += f64::from(r.cumulative_self);
            reward[1] += f64::from(r.cumulative_opp);
            coop[0] += r.cooperation_rate_self;
            coop[1] += r.cooperation_rate_opp;
        }
        let n = cfg.eval_matches.max(1) as f64;
        for (k, (agent, adjusted)) in [(&*a, &adjusted_a), (&*b, &adjusted_b)].into_iter().enumerate() {
            sink(&CycleRecord {
                cycle: agent.cycles_done,
                agent_id: agent.id.clone(),
                eta: agent.cfg.eta,
                eval_cum_reward: reward[k] / n,
                coop_rate: coop[k] / n,
                adjusted_reward_mean: mean(adjusted),
            });
        }
    }
    Ok(())
}

fn static_rollout(
    agent: &mut LtpAgent,
    q: QBackend,
    opp: &mut StaticAgent,
    start: HistoryWindow,
) -> Result<(Trajectory, QBackend), LearnerError> {
    let mut q = q;
    let mut history = start;
    let mut tau = Trajectory::default();
    let lr = agent.rollout_lr();
    for t in 0..agent.cfg.horizon {
        let values = q.q_values(&history.observation())?;
        let a = if t == 0 {
            select_action(values, agent.first_move_epsilon(), &mut agent.rng)
        } else {
            argmax(&values)
        };
        let act = Action::from_index(a).expect("two actions");
        let opp_act = opp.decide(&history.swapped(), false).expect("static agents always act");
        let (r, _) = agent.payoff.payoff(act, opp_act);
        let next = history.push_round(act, opp_act);
        let step = TrajectoryStep {
            state: history.state_index(),
            action: act,
            reward: r,
            next_state: next.state_index(),
        };
        if lr != 0.0 {
            let frozen = q.clone();
            let sample = [crate::learners::TdSample {
                state: step.state,
                action: act.index(),
                reward: f64::from(r),
                next_state: step.next_state,
            }];
            td_update(&mut q, &frozen, &sample, agent.learner.gamma, lr, &mut plain_input)?;
        }
        tau.steps.push(step);
        history = next;
    }
    Ok((tau, q))
}

fn train_vs_static(
    a: &mut LtpAgent,
    kind: Option<StrategyKind>,
    sink: &mut dyn FnMut(&CycleRecord),
) -> Result<(), ArenaError> {
    let cfg = a.cfg.clone();
    let match_cfg = MatchConfig::new(cfg.match_steps, a.payoff, 0)?;
    let opp_seed = crate::rng::derive_seed(a.seed, &[5]);
    let mut opp = static_agent(kind, opp_seed);
    for _ in 0..cfg.cycles {
        // Exploration phase: whole matches against fresh opponents.
        let mut history = HistoryWindow::new();
        for step in 0..cfg.probe_phase_steps {
            if step % cfg.match_steps == 0 {
                history = HistoryWindow::new();
                opp.begin_match();
            }
            let act = a.probe.act(&history)?;
            let opp_act = opp.decide(&history.swapped(), true).expect("static agents always act");
            let (r, _) = a.payoff.payoff(act, opp_act);
            let next = history.push_round(act, opp_act);
            a.store(Experience {
                state: history.state_index(),
                action: act,
                reward: r,
                next_state: next.state_index(),
                opp_action: opp_act,
            })?;
            history = next;
        }

        // Rollouts start after a fresh match prefix of random length.
        let mut adjusted = Vec::with_capacity(cfg.rollouts_per_cycle);
        let max_prefix = cfg.match_steps.saturating_sub(cfg.horizon);
        for _ in 0..cfg.rollouts_per_cycle {
            let q = a.shifted_copy(None)?;
            opp.begin_match();
            let mut history = HistoryWindow::new();
            let prefix = a.rng.gen_range(0..=max_prefix);
            for _ in 0..prefix {
                let act = a.probe.greedy(&history)?;
                let act = if a.rng.gen::<f64>() < a.probe.epsilon_now() {
                    Action::from_index(a.rng.gen_range(0..2)).expect("two actions")
                } else {
                    act
                };
                let opp_act = opp.decide(&history.swapped(), false).expect("static agents always act");
                history = history.push_round(act, opp_act);
            }
            let (tau, adapted) = static_rollout(a, q, &mut opp, history)?;
            adjusted.push(a.emit(&tau)?);
            if cfg.persist_rollout_updates {
                a.probe.q = adapted;
            }
        }

        a.train_and_sync()?;
        a.cycles_done += 1;

        let mut reward = 0.0;
        let mut coop = 0.0;
        for _ in 0..cfg.eval_matches.max(1) {
            let r = play_match(a, &mut opp, &match_cfg, false)?;
            reward += f64::from(r.cumulative_self);
            coop += r.cooperation_rate_self;
        }
        let n = cfg.eval_matches.max(1) as f64;
        sink(&CycleRecord {
            cycle: a.cycles_done,
            agent_id: a.id.clone(),
            eta: cfg.eta,
            eval_cum_reward: reward / n,
            coop_rate: coop / n,
            adjusted_reward_mean: mean(&adjusted),
        });
    }
    Ok(())
}
