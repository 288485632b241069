use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LearnerError, NeuralError};
use crate::game::{observation_from_index, Action, Agent, HistoryWindow, Transition, NUM_STATES, OBS_DIM};
use crate::learners::buffer::ReplayBuffer;
use crate::learners::opponent::OpponentModel;
use crate::learners::schedule::EpsilonSchedule;
use crate::learners::td::{plain_input, td_update, Experience};
use crate::neural::{argmax, Mlp, QBackend, QFunction, TabularQ, TargetNetwork, DEFAULT_HIDDEN};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Tabular,
    #[default]
    Neural,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerKind {
    /// Independent deep (or tabular) Q-learner.
    Q,
    /// Q over the observation and a learned estimate of the opponent's
    /// mixed strategy.
    HyperQ,
}

impl LearnerKind {
    pub fn name(self) -> &'static str {
        match self {
            LearnerKind::Q => "q",
            LearnerKind::HyperQ => "hyper_q",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnerConfig {
    pub backend: BackendKind,
    pub gamma: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Defaults to 90% of the run's planned environment steps.
    pub epsilon_decay_steps: Option<u64>,
    /// Gradient steps between target refreshes.
    pub target_sync: usize,
    pub hidden: Vec<usize>,
    /// Environment steps per gradient step.
    pub train_every: usize,
    /// Opponent-model fitting window (newest experiences).
    pub recent_window: usize,
    /// Defaults to `learning_rate`.
    pub opponent_learning_rate: Option<f64>,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig {
            backend: BackendKind::Neural,
            gamma: 0.99,
            learning_rate: 1e-4,
            batch_size: 300,
            buffer_capacity: 100_000,
            epsilon_start: 1.0,
            epsilon_end: 0.1,
            epsilon_decay_steps: None,
            target_sync: 500,
            hidden: DEFAULT_HIDDEN.to_vec(),
            train_every: 1,
            recent_window: 2_000,
            opponent_learning_rate: None,
        }
    }
}

impl LearnerConfig {
    pub fn tabular(learning_rate: f64) -> Self {
        LearnerConfig {
            backend: BackendKind::Tabular,
            learning_rate,
            target_sync: 1,
            ..LearnerConfig::default()
        }
    }

    pub fn schedule(&self, planned_steps: u64) -> EpsilonSchedule {
        match self.epsilon_decay_steps {
            Some(d) => EpsilonSchedule::new(self.epsilon_start, self.epsilon_end, d),
            None => EpsilonSchedule::for_total_steps(self.epsilon_start, self.epsilon_end, planned_steps),
        }
    }

    /// A fresh Q-function of this configuration with `input` features.
    pub fn backend(&self, input: usize, seed: u64) -> QBackend {
        match self.backend {
            BackendKind::Tabular => QBackend::Tabular(TabularQ::new(self.learning_rate)),
            BackendKind::Neural => QBackend::Neural(Mlp::with_hidden(input, &self.hidden, 2, seed)),
        }
    }
}

/// Epsilon-greedy choice over two Q-values; ties go to the lower index.
pub fn select_action<R: Rng>(q: [f64; 2], epsilon: f64, rng: &mut R) -> usize {
    if rng.gen::<f64>() < epsilon {
        rng.gen_range(0..2)
    } else {
        argmax(&q)
    }
}

/// A value-based learner. With an opponent model it is Hyper-Q: the network
/// input is the observation followed by the predicted opponent strategy.
#[derive(Clone, Debug)]
pub struct QLearner {
    id: String,
    kind: LearnerKind,
    pub(crate) online: QBackend,
    pub(crate) target: TargetNetwork<QBackend>,
    buffer: ReplayBuffer<Experience>,
    pub(crate) epsilon: EpsilonSchedule,
    gamma: f64,
    learning_rate: f64,
    batch_size: usize,
    train_every: usize,
    pub(crate) step_count: u64,
    pub(crate) updates: u64,
    pub(crate) opponent: Option<OpponentModel>,
    act_rng: ChaCha8Rng,
    sample_rng: ChaCha8Rng,
    fault: Option<LearnerError>,
}

impl QLearner {
    pub fn new(id: impl Into<String>, kind: LearnerKind, cfg: &LearnerConfig, planned_steps: u64, seed: u64) -> Self {
        let opponent = match kind {
            LearnerKind::Q => None,
            LearnerKind::HyperQ => Some(OpponentModel::network(
                &cfg.hidden,
                cfg.opponent_learning_rate.unwrap_or(cfg.learning_rate),
                cfg.batch_size,
                cfg.recent_window,
                crate::rng::derive_seed(seed, &[3]),
            )),
        };
        let input = if opponent.is_some() { OBS_DIM + 2 } else { OBS_DIM };
        let online = cfg.backend(input, crate::rng::derive_seed(seed, &[0]));
        QLearner::from_parts(id, kind, online, opponent, cfg, planned_steps, seed)
    }

    /// Builds a learner around an explicit Q-function and opponent model.
    pub fn from_parts(
        id: impl Into<String>,
        kind: LearnerKind,
        online: QBackend,
        opponent: Option<OpponentModel>,
        cfg: &LearnerConfig,
        planned_steps: u64,
        seed: u64,
    ) -> Self {
        QLearner {
            id: id.into(),
            kind,
            target: TargetNetwork::new(&online, cfg.target_sync),
            online,
            buffer: ReplayBuffer::new(cfg.buffer_capacity),
            epsilon: cfg.schedule(planned_steps),
            gamma: cfg.gamma,
            learning_rate: cfg.learning_rate,
            batch_size: cfg.batch_size,
            train_every: cfg.train_every.max(1),
            step_count: 0,
            updates: 0,
            opponent,
            act_rng: crate::rng::stream(seed, &[1]),
            sample_rng: crate::rng::stream(seed, &[2]),
            fault: None,
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn kind(&self) -> LearnerKind {
        self.kind
    }

    pub fn online(&self) -> &QBackend {
        &self.online
    }

    pub fn target(&self) -> &QBackend {
        &self.target.params
    }

    pub fn buffer(&self) -> &ReplayBuffer<Experience> {
        &self.buffer
    }

    pub fn opponent_model(&self) -> Option<&OpponentModel> {
        self.opponent.as_ref()
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon.value(self.step_count)
    }

    pub fn schedule(&self) -> EpsilonSchedule {
        self.epsilon
    }

    pub fn set_schedule(&mut self, s: EpsilonSchedule) {
        self.epsilon = s;
    }

    /// The first error raised during learning, if any. A faulted learner
    /// refuses to act.
    pub fn fault(&self) -> Option<&LearnerError> {
        self.fault.as_ref()
    }

    fn input(&self, state: u8) -> Result<Vec<f64>, NeuralError> {
        let mut x = observation_from_index(state).to_vec();
        if let Some(m) = &self.opponent {
            x.extend(m.predict(state)?);
        }
        Ok(x)
    }

    pub fn q_values(&self, state: u8) -> Result<[f64; 2], NeuralError> {
        self.online.q_values(&self.input(state)?)
    }

    pub fn greedy(&self, state: u8) -> Result<Action, NeuralError> {
        let q = self.q_values(state)?;
        Ok(Action::from_index(argmax(&q)).expect("two actions"))
    }

    /// Greedy action in every history state.
    pub fn greedy_policy(&self) -> Result<Vec<Action>, NeuralError> {
        (0..NUM_STATES).map(|s| self.greedy(s as u8)).collect()
    }

    pub fn store(&mut self, e: Experience) {
        self.buffer.store(e);
    }

    /// One gradient step: the opponent model first (Hyper-Q), then the TD
    /// update on a uniform batch.
    pub fn train_step(&mut self) -> Result<(), LearnerError> {
        if self.buffer.is_empty() {
            return Err(LearnerError::EmptyBuffer);
        }
        if let Some(m) = &mut self.opponent {
            m.update(&self.buffer)?;
        }
        let n = self.batch_size.min(self.buffer.len());
        let batch: Vec<_> = self
            .buffer
            .sample(n, &mut self.sample_rng)?
            .iter()
            .map(Experience::td_sample)
            .collect();
        match &self.opponent {
            None => td_update(
                &mut self.online,
                &self.target.params,
                &batch,
                self.gamma,
                self.learning_rate,
                &mut plain_input,
            )?,
            Some(m) => {
                let mut cache: Vec<Option<[f64; 2]>> = vec![None; NUM_STATES];
                let mut encode = |s: u8| -> Result<Vec<f64>, NeuralError> {
                    let y = match cache[s as usize] {
                        Some(y) => y,
                        None => {
                            let y = m.predict(s)?;
                            cache[s as usize] = Some(y);
                            y
                        }
                    };
                    let mut x = observation_from_index(s).to_vec();
                    x.extend(y);
                    Ok(x)
                };
                td_update(
                    &mut self.online,
                    &self.target.params,
                    &batch,
                    self.gamma,
                    self.learning_rate,
                    &mut encode,
                )?
            }
        }
        self.updates += 1;
        self.target.after_update(&self.online);
        Ok(())
    }

    /// Records a transition and trains when due.
    pub fn learn(&mut self, t: &Transition) -> Result<(), LearnerError> {
        self.store(Experience::from_transition(t));
        self.step_count += 1;
        if self.buffer.len() >= self.batch_size && self.step_count % self.train_every as u64 == 0 {
            self.train_step()?;
        }
        Ok(())
    }

    fn act(&mut self, state: u8, explore: bool) -> Result<Action, NeuralError> {
        let q = self.q_values(state)?;
        let eps = if explore { self.epsilon() } else { 0.0 };
        let a = if explore {
            select_action(q, eps, &mut self.act_rng)
        } else {
            argmax(&q)
        };
        Ok(Action::from_index(a).expect("two actions"))
    }
}

impl Agent for QLearner {
    fn label(&self) -> String {
        self.id.clone()
    }

    fn decide(&mut self, view: &HistoryWindow, explore: bool) -> Option<Action> {
        if self.fault.is_some() {
            return None;
        }
        match self.act(view.state_index(), explore) {
            Ok(a) => Some(a),
            Err(e) => {
                self.fault = Some(e.into());
                None
            }
        }
    }

    fn observe(&mut self, t: &Transition) {
        if self.fault.is_some() {
            return;
        }
        if let Err(e) = self.learn(t) {
            self.fault = Some(e);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use crate::game::{play_match, MatchConfig};
    use crate::strategies::{make_strategy, StrategyKind};

    #[test]
    fn epsilon_one_is_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let ones: usize = (0..10_000).map(|_| select_action([0.0, 9.0], 1.0, &mut rng)).sum();
        // 3 sigma of Binomial(10^4, 1/2) is 150.
        assert!((ones as f64 - 5000.0).abs() < 150.0);
    }

    #[test]
    fn greedy_choice_and_ties() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        assert_eq!(select_action([2.0, 5.0], 0.0, &mut rng), 1);
        assert_eq!(select_action([3.0, 3.0], 0.0, &mut rng), 0);
    }

    #[test]
    fn myopic_tabular_learner_defects_against_all_c() {
        let cfg = LearnerConfig {
            gamma: 0.0,
            batch_size: 16,
            ..LearnerConfig::tabular(0.5)
        };
        let mut l = QLearner::new("q", LearnerKind::Q, &cfg, 20_000, 5);
        let mut opp = make_strategy(StrategyKind::AlwaysCooperate, 0);
        let mc = MatchConfig::tournament(0);
        for _ in 0..200 {
            play_match(&mut l, &mut opp, &mc, true).unwrap();
        }
        // Every reachable state sees D preferred.
        for s in l.buffer().iter().map(|e| e.state) {
            assert_eq!(l.greedy(s).unwrap(), Action::Defect);
        }
    }

    #[test]
    fn same_seed_same_parameters() {
        let cfg = LearnerConfig {
            batch_size: 32,
            ..LearnerConfig::default()
        };
        let run = || {
            let mut l = QLearner::new("q", LearnerKind::HyperQ, &cfg, 2_000, 9);
            let mut opp = make_strategy(StrategyKind::TitForTat, 0);
            for _ in 0..5 {
                play_match(&mut l, &mut opp, &MatchConfig::tournament(0), true).unwrap();
            }
            match l.online() {
                QBackend::Neural(m) => m.params_flat(),
                QBackend::Tabular(_) => unreachable!(),
            }
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn target_lags_online() {
        let cfg = LearnerConfig {
            batch_size: 4,
            target_sync: 3,
            ..LearnerConfig::default()
        };
        let mut l = QLearner::new("q", LearnerKind::Q, &cfg, 100, 1);
        let before = l.target().clone();
        let mut opp = make_strategy(StrategyKind::AlwaysDefect, 0);
        let mc = MatchConfig::new(5, Default::default(), 0).unwrap();
        play_match(&mut l, &mut opp, &mc, true).unwrap();
        // Training starts at step 4: two updates, no sync yet.
        assert_eq!(l.updates(), 2);
        assert_eq!(l.target(), &before);
        play_match(&mut l, &mut opp, &MatchConfig::new(1, Default::default(), 0).unwrap(), true).unwrap();
        assert_eq!(l.updates(), 3);
        assert_eq!(l.target(), l.online());
    }
}
