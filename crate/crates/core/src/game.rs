//! The prisoner's-dilemma stage game, history windows, observation encoding
//! and match execution shared by every agent.

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::GameError;

/// Number of past rounds an agent can see.
pub const HISTORY_LEN: usize = 4;
/// Length of the encoded observation vector (own moves then opponent moves).
pub const OBS_DIM: usize = 2 * HISTORY_LEN;
/// Number of distinct observations; every history window maps to one of them.
pub const NUM_STATES: usize = 1 << OBS_DIM;

/// Reward units. Scores are kept as integers and converted to `f64` only
/// when they reach a learner.
pub type Reward = i32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Action {
    Cooperate,
    Defect,
}

impl Action {
    pub const ALL: [Action; 2] = [Action::Cooperate, Action::Defect];

    /// Numeric encoding: Cooperate = 0, Defect = 1.
    pub fn index(self) -> usize {
        match self {
            Action::Cooperate => 0,
            Action::Defect => 1,
        }
    }

    pub fn from_index(index: usize) -> Option<Action> {
        match index {
            0 => Some(Action::Cooperate),
            1 => Some(Action::Defect),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Action::Cooperate => "C",
            Action::Defect => "D",
        }
    }

    pub fn is_cooperate(self) -> bool {
        self == Action::Cooperate
    }

    pub(crate) fn bit(self) -> f64 {
        self.index() as f64
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Stage-game payoffs. Must satisfy `T > R > P > S` and `2R > T + S`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PayoffMatrix {
    #[serde(rename = "T")]
    pub temptation: Reward,
    #[serde(rename = "R")]
    pub reward: Reward,
    #[serde(rename = "P")]
    pub punishment: Reward,
    #[serde(rename = "S")]
    pub sucker: Reward,
}

impl Default for PayoffMatrix {
    fn default() -> Self {
        PayoffMatrix {
            temptation: 5,
            reward: 3,
            punishment: 1,
            sucker: 0,
        }
    }
}

impl PayoffMatrix {
    pub fn new(temptation: Reward, reward: Reward, punishment: Reward, sucker: Reward) -> Self {
        PayoffMatrix {
            temptation,
            reward,
            punishment,
            sucker,
        }
    }

    pub fn validate(self) -> Result<Self, GameError> {
        validate_matrix(self)
    }

    /// `(mover, opponent)` rewards for a joint action.
    pub fn payoff(&self, a_self: Action, a_opp: Action) -> (Reward, Reward) {
        use Action::*;
        match (a_self, a_opp) {
            (Cooperate, Cooperate) => (self.reward, self.reward),
            (Cooperate, Defect) => (self.sucker, self.temptation),
            (Defect, Cooperate) => (self.temptation, self.sucker),
            (Defect, Defect) => (self.punishment, self.punishment),
        }
    }

    /// The four distinct single-round rewards in ascending order `[S, P, R, T]`.
    pub fn outcomes(&self) -> [Reward; 4] {
        [self.sucker, self.punishment, self.reward, self.temptation]
    }

    /// Position of `r` in [`outcomes`](Self::outcomes), if it is a stage-game reward.
    pub fn outcome_index(&self, r: Reward) -> Option<usize> {
        self.outcomes().iter().position(|&o| o == r)
    }
}

/// `(mover, opponent)` rewards for a joint action under `m`.
pub fn payoff(a_self: Action, a_opp: Action, m: &PayoffMatrix) -> (Reward, Reward) {
    m.payoff(a_self, a_opp)
}

pub fn validate_matrix(m: PayoffMatrix) -> Result<PayoffMatrix, GameError> {
    if !(m.temptation > m.reward && m.reward > m.punishment && m.punishment > m.sucker) {
        return Err(GameError::OrderingViolation {
            t: m.temptation,
            r: m.reward,
            p: m.punishment,
            s: m.sucker,
        });
    }
    if 2 * m.reward <= m.temptation + m.sucker {
        return Err(GameError::SocialityViolation {
            t: m.temptation,
            r: m.reward,
            s: m.sucker,
        });
    }
    Ok(m)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundOutcome {
    pub action_self: Action,
    pub action_opp: Action,
    pub reward_self: Reward,
    pub reward_opp: Reward,
    pub round_index: usize,
}

/// How rounds before the start of a match are filled in observations.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PadPolicy {
    #[default]
    PadCooperate,
}

/// The most recent [`HISTORY_LEN`] rounds seen from one player's side.
///
/// Both sequences are stored oldest first and always have equal length.
/// It is `Copy`; [`push_round`](Self::push_round) returns a new window.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct HistoryWindow {
    self_actions: [Action; HISTORY_LEN],
    opp_actions: [Action; HISTORY_LEN],
    len: u8,
    pad: PadPolicy,
}

impl Default for HistoryWindow {
    fn default() -> Self {
        HistoryWindow::new()
    }
}

impl HistoryWindow {
    pub fn new() -> Self {
        HistoryWindow {
            self_actions: [Action::Cooperate; HISTORY_LEN],
            opp_actions: [Action::Cooperate; HISTORY_LEN],
            len: 0,
            pad: PadPolicy::PadCooperate,
        }
    }

    /// Builds a window from explicit sequences (oldest first). Only the last
    /// [`HISTORY_LEN`] entries are kept.
    pub fn from_actions(self_actions: &[Action], opp_actions: &[Action]) -> Option<Self> {
        if self_actions.len() != opp_actions.len() {
            return None;
        }
        Some(
            self_actions
                .iter()
                .zip(opp_actions)
                .fold(HistoryWindow::new(), |h, (&s, &o)| h.push_round(s, o)),
        )
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn pad_policy(&self) -> PadPolicy {
        self.pad
    }

    pub fn self_actions(&self) -> &[Action] {
        &self.self_actions[..self.len()]
    }

    pub fn opp_actions(&self) -> &[Action] {
        &self.opp_actions[..self.len()]
    }

    pub fn last_self(&self) -> Option<Action> {
        self.self_actions().last().copied()
    }

    pub fn last_opp(&self) -> Option<Action> {
        self.opp_actions().last().copied()
    }

    pub fn push_round(mut self, a_self: Action, a_opp: Action) -> Self {
        self.push(a_self, a_opp);
        self
    }

    pub fn push(&mut self, a_self: Action, a_opp: Action) {
        let n = self.len();
        if n < HISTORY_LEN {
            self.self_actions[n] = a_self;
            self.opp_actions[n] = a_opp;
            self.len += 1;
        } else {
            self.self_actions.rotate_left(1);
            self.opp_actions.rotate_left(1);
            self.self_actions[HISTORY_LEN - 1] = a_self;
            self.opp_actions[HISTORY_LEN - 1] = a_opp;
        }
    }

    /// The same window as seen by the opponent.
    pub fn swapped(&self) -> Self {
        HistoryWindow {
            self_actions: self.opp_actions,
            opp_actions: self.self_actions,
            len: self.len,
            pad: self.pad,
        }
    }

    fn padded(&self, actions: &[Action; HISTORY_LEN]) -> [Action; HISTORY_LEN] {
        let fill = match self.pad {
            PadPolicy::PadCooperate => Action::Cooperate,
        };
        let n = self.len();
        let mut out = [fill; HISTORY_LEN];
        out[HISTORY_LEN - n..].copy_from_slice(&actions[..n]);
        out
    }

    pub fn observation(&self) -> [f64; OBS_DIM] {
        encode_observation(self)
    }

    /// The observation's 8 bits read as an integer, first own move as the
    /// most significant bit. All-cooperate is 0, all-defect is 255.
    pub fn state_index(&self) -> u8 {
        let s = self.padded(&self.self_actions);
        let o = self.padded(&self.opp_actions);
        s.iter()
            .chain(o.iter())
            .fold(0u8, |acc, a| (acc << 1) | a.index() as u8)
    }
}

/// `[s1..s4, o1..o4]`, oldest to newest, 0.0 for C and 1.0 for D. Rounds
/// before the match start are padded according to the window's policy.
pub fn encode_observation(h: &HistoryWindow) -> [f64; OBS_DIM] {
    let s = h.padded(&h.self_actions);
    let o = h.padded(&h.opp_actions);
    let mut out = [0.0; OBS_DIM];
    for i in 0..HISTORY_LEN {
        out[i] = s[i].bit();
        out[HISTORY_LEN + i] = o[i].bit();
    }
    out
}

/// Inverse of [`HistoryWindow::state_index`] on the observation vector.
pub fn observation_from_index(index: u8) -> [f64; OBS_DIM] {
    let mut out = [0.0; OBS_DIM];
    for (i, v) in out.iter_mut().enumerate() {
        *v = ((index >> (OBS_DIM - 1 - i)) & 1) as f64;
    }
    out
}

pub fn push_round(h: &HistoryWindow, a_self: Action, a_opp: Action) -> HistoryWindow {
    h.push_round(a_self, a_opp)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchConfig {
    pub steps: usize,
    pub payoff: PayoffMatrix,
    /// Identifies the RNG stream agents built for this match draw from.
    pub seed: u64,
}

impl MatchConfig {
    pub fn new(steps: usize, payoff: PayoffMatrix, seed: u64) -> Result<Self, GameError> {
        if steps == 0 {
            return Err(GameError::InvalidSteps);
        }
        Ok(MatchConfig {
            steps,
            payoff: payoff.validate()?,
            seed,
        })
    }

    /// 100-round tournament match with the default payoffs.
    pub fn tournament(seed: u64) -> Self {
        MatchConfig {
            steps: 100,
            payoff: PayoffMatrix::default(),
            seed,
        }
    }
}

/// One agent's view of a single round, delivered when a match is played
/// with learning enabled.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Transition {
    pub state: HistoryWindow,
    pub action: Action,
    pub opp_action: Action,
    pub reward: Reward,
    pub next_state: HistoryWindow,
}

/// A decision source: anything that can pick a move from its own view of the
/// history. Agents only ever see their own perspective.
pub trait Agent {
    fn label(&self) -> String;

    /// Called before the first round of every match.
    fn begin_match(&mut self) {}

    /// Picks the next move. `explore` is false for greedy evaluation matches.
    /// `None` means the agent failed to produce a move.
    fn decide(&mut self, view: &HistoryWindow, explore: bool) -> Option<Action>;

    /// Learning callback, only invoked when the match is played with learning on.
    fn observe(&mut self, _transition: &Transition) {}

    fn end_match(&mut self) {}
}

impl<A: Agent + ?Sized> Agent for Box<A> {
    fn label(&self) -> String {
        (**self).label()
    }
    fn begin_match(&mut self) {
        (**self).begin_match()
    }
    fn decide(&mut self, view: &HistoryWindow, explore: bool) -> Option<Action> {
        (**self).decide(view, explore)
    }
    fn observe(&mut self, transition: &Transition) {
        (**self).observe(transition)
    }
    fn end_match(&mut self) {
        (**self).end_match()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub outcomes: Vec<RoundOutcome>,
    pub cumulative_self: Reward,
    pub cumulative_opp: Reward,
    pub cooperation_rate_self: f64,
    pub cooperation_rate_opp: f64,
}

impl MatchResult {
    pub fn from_outcomes(outcomes: Vec<RoundOutcome>) -> Self {
        let n = outcomes.len().max(1) as f64;
        let cumulative_self = outcomes.iter().map(|o| o.reward_self).sum();
        let cumulative_opp = outcomes.iter().map(|o| o.reward_opp).sum();
        let coop_self = outcomes.iter().filter(|o| o.action_self.is_cooperate()).count();
        let coop_opp = outcomes.iter().filter(|o| o.action_opp.is_cooperate()).count();
        MatchResult {
            outcomes,
            cumulative_self,
            cumulative_opp,
            cooperation_rate_self: coop_self as f64 / n,
            cooperation_rate_opp: coop_opp as f64 / n,
        }
    }

    pub fn steps(&self) -> usize {
        self.outcomes.len()
    }

    /// Fraction of rounds where both players cooperated.
    pub fn mutual_cooperation_rate(&self) -> f64 {
        let n = self.outcomes.len().max(1) as f64;
        self.outcomes
            .iter()
            .filter(|o| o.action_self.is_cooperate() && o.action_opp.is_cooperate())
            .count() as f64
            / n
    }

    /// The same match seen from the second player's side.
    pub fn swapped(&self) -> MatchResult {
        MatchResult {
            outcomes: self
                .outcomes
                .iter()
                .map(|o| RoundOutcome {
                    action_self: o.action_opp,
                    action_opp: o.action_self,
                    reward_self: o.reward_opp,
                    reward_opp: o.reward_self,
                    round_index: o.round_index,
                })
                .collect(),
            cumulative_self: self.cumulative_opp,
            cumulative_opp: self.cumulative_self,
            cooperation_rate_self: self.cooperation_rate_opp,
            cooperation_rate_opp: self.cooperation_rate_self,
        }
    }

    /// Appends one CSV row per round:
    /// `match_id,round,action_a,action_b,reward_a,reward_b`.
    pub fn write_csv<W: Write>(&self, w: &mut csv::Writer<W>, match_id: u64) -> csv::Result<()> {
        for o in &self.outcomes {
            w.serialize(MatchRow {
                match_id,
                round: o.round_index,
                action_a: o.action_self.as_str(),
                action_b: o.action_opp.as_str(),
                reward_a: o.reward_self,
                reward_b: o.reward_opp,
            })?;
        }
        Ok(())
    }
}

#[derive(Serialize)]
struct MatchRow {
    match_id: u64,
    round: usize,
    action_a: &'static str,
    action_b: &'static str,
    reward_a: Reward,
    reward_b: Reward,
}

/// Plays `cfg.steps` simultaneous-move rounds between `a` and `b`.
///
/// Each agent sees its own perspective of the shared history. With
/// `learning` set, both receive a [`Transition`] after every round and act
/// with exploration; otherwise they act greedily and learn nothing.
pub fn play_match(
    a: &mut dyn Agent,
    b: &mut dyn Agent,
    cfg: &MatchConfig,
    learning: bool,
) -> Result<MatchResult, GameError> {
    if cfg.steps == 0 {
        return Err(GameError::InvalidSteps);
    }
    a.begin_match();
    b.begin_match();
    let mut history = HistoryWindow::new();
    let mut outcomes = Vec::with_capacity(cfg.steps);
    for round in 0..cfg.steps {
        let view_b = history.swapped();
        let act_a = a.decide(&history, learning).ok_or_else(|| GameError::AgentFailure {
            agent: a.label(),
            round,
        })?;
        let act_b = b.decide(&view_b, learning).ok_or_else(|| GameError::AgentFailure {
            agent: b.label(),
            round,
        })?;
        let (r_a, r_b) = cfg.payoff.payoff(act_a, act_b);
        let next = history.push_round(act_a, act_b);
        if learning {
            a.observe(&Transition {
                state: history,
                action: act_a,
                opp_action: act_b,
                reward: r_a,
                next_state: next,
            });
            b.observe(&Transition {
                state: view_b,
                action: act_b,
                opp_action: act_a,
                reward: r_b,
                next_state: next.swapped(),
            });
        }
        outcomes.push(RoundOutcome {
            action_self: act_a,
            action_opp: act_b,
            reward_self: r_a,
            reward_opp: r_b,
            round_index: round,
        });
        history = next;
    }
    a.end_match();
    b.end_match();
    Ok(MatchResult::from_outcomes(outcomes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use Action::*;

    struct Fixed(Action);
    impl Agent for Fixed {
        fn label(&self) -> String {
            format!("fixed-{}", self.0)
        }
        fn decide(&mut self, _: &HistoryWindow, _: bool) -> Option<Action> {
            Some(self.0)
        }
    }

    struct Mute;
    impl Agent for Mute {
        fn label(&self) -> String {
            "mute".into()
        }
        fn decide(&mut self, _: &HistoryWindow, _: bool) -> Option<Action> {
            None
        }
    }

    #[test]
    fn payoff_table_default() {
        let m = PayoffMatrix::default();
        assert_eq!(payoff(Cooperate, Cooperate, &m), (3, 3));
        assert_eq!(payoff(Defect, Cooperate, &m), (5, 0));
        assert_eq!(payoff(Cooperate, Defect, &m), (0, 5));
        assert_eq!(payoff(Defect, Defect, &m), (1, 1));
    }

    #[test]
    fn payoff_is_symmetric() {
        let m = PayoffMatrix::default();
        for a in Action::ALL {
            for b in Action::ALL {
                assert_eq!(m.payoff(a, b).0, m.payoff(b, a).1);
            }
        }
    }

    #[test]
    fn matrix_validation() {
        assert!(validate_matrix(PayoffMatrix::new(5, 3, 1, 0)).is_ok());
        assert!(matches!(
            validate_matrix(PayoffMatrix::new(5, 3, 3, 0)),
            Err(GameError::OrderingViolation { .. })
        ));
        assert!(matches!(
            validate_matrix(PayoffMatrix::new(6, 3, 1, 0)),
            Err(GameError::SocialityViolation { .. })
        ));
    }

    #[test]
    fn action_encoding_round_trips() {
        for a in Action::ALL {
            assert_eq!(Action::from_index(a.index()), Some(a));
        }
        assert_eq!(Action::from_index(2), None);
    }

    #[test]
    fn observation_encoding() {
        assert_eq!(encode_observation(&HistoryWindow::new()), [0.0; 8]);
        let h = HistoryWindow::from_actions(&[Cooperate, Defect], &[Defect, Defect]).unwrap();
        assert_eq!(encode_observation(&h), [0., 0., 0., 1., 0., 0., 1., 1.]);
        let mut h = HistoryWindow::new();
        for _ in 0..4 {
            h.push(Defect, Defect);
        }
        assert_eq!(encode_observation(&h), [1.0; 8]);
        assert_eq!(h.state_index(), 255);
    }

    #[test]
    fn state_index_matches_observation_bits() {
        let h = HistoryWindow::from_actions(&[Cooperate, Defect], &[Defect, Defect]).unwrap();
        assert_eq!(observation_from_index(h.state_index()), encode_observation(&h));
        assert_eq!(HistoryWindow::new().state_index(), 0);
    }

    #[test]
    fn push_round_semantics() {
        let empty = HistoryWindow::new();
        let h = push_round(&empty, Cooperate, Defect);
        assert!(empty.is_empty());
        assert_eq!(h.self_actions(), &[Cooperate]);
        assert_eq!(h.opp_actions(), &[Defect]);

        let mut full = HistoryWindow::new();
        for _ in 0..4 {
            full.push(Cooperate, Cooperate);
        }
        let h = full.push_round(Defect, Defect);
        assert_eq!(h.len(), 4);
        assert_eq!(h.last_self(), Some(Defect));
        assert_eq!(h.last_opp(), Some(Defect));
        assert_eq!(full.last_self(), Some(Cooperate));

        let mut h = HistoryWindow::new();
        for _ in 0..5 {
            h.push(Cooperate, Cooperate);
        }
        assert_eq!(h.len(), 4);
    }

    #[test]
    fn swapped_view() {
        let h = HistoryWindow::from_actions(&[Cooperate, Defect], &[Defect, Cooperate]).unwrap();
        let s = h.swapped();
        assert_eq!(s.self_actions(), h.opp_actions());
        assert_eq!(s.swapped(), h);
    }

    #[test]
    fn all_d_vs_all_c() {
        let cfg = MatchConfig::new(20, PayoffMatrix::default(), 0).unwrap();
        let r = play_match(&mut Fixed(Defect), &mut Fixed(Cooperate), &cfg, false).unwrap();
        assert_eq!((r.cumulative_self, r.cumulative_opp), (100, 0));
        assert_eq!(r.cooperation_rate_self, 0.0);
        assert_eq!(r.cooperation_rate_opp, 1.0);
        for o in &r.outcomes {
            assert_eq!(cfg.payoff.payoff(o.action_self, o.action_opp), (o.reward_self, o.reward_opp));
        }
    }

    #[test]
    fn agent_failure_is_reported() {
        let cfg = MatchConfig::tournament(0);
        let err = play_match(&mut Fixed(Defect), &mut Mute, &cfg, false).unwrap_err();
        assert!(matches!(err, GameError::AgentFailure { round: 0, .. }));
    }

    #[test]
    fn zero_steps_rejected() {
        assert!(MatchConfig::new(0, PayoffMatrix::default(), 0).is_err());
    }

    #[test]
    fn match_csv_rows() {
        let cfg = MatchConfig::new(2, PayoffMatrix::default(), 0).unwrap();
        let r = play_match(&mut Fixed(Defect), &mut Fixed(Cooperate), &cfg, false).unwrap();
        let mut w = csv::Writer::from_writer(Vec::new());
        r.write_csv(&mut w, 7).unwrap();
        let text = String::from_utf8(w.into_inner().unwrap()).unwrap();
        assert_eq!(
            text,
            "match_id,round,action_a,action_b,reward_a,reward_b\n7,0,D,C,5,0\n7,1,D,C,5,0\n"
        );
    }
}
