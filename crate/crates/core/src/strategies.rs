//! Axelrod-style static opponents and trivial baselines.
//!
//! Every strategy is a small state machine driven by the opponent's last
//! move. State lives for one match only: [`StaticAgent::begin_match`]
//! resets it.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::ArenaError;
use crate::game::{Action, Agent, HistoryWindow};

use Action::{Cooperate as C, Defect as D};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    #[serde(rename = "all_c")]
    AlwaysCooperate,
    #[serde(rename = "all_d")]
    AlwaysDefect,
    #[serde(rename = "random")]
    RandomUniform,
    #[serde(rename = "tft")]
    TitForTat,
    Punisher,
    ForgetfulGrudger,
    Prober,
    Sneaky,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 8] = [
        StrategyKind::AlwaysCooperate,
        StrategyKind::AlwaysDefect,
        StrategyKind::RandomUniform,
        StrategyKind::TitForTat,
        StrategyKind::Punisher,
        StrategyKind::ForgetfulGrudger,
        StrategyKind::Prober,
        StrategyKind::Sneaky,
    ];

    /// Stable name used in config files.
    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::AlwaysCooperate => "all_c",
            StrategyKind::AlwaysDefect => "all_d",
            StrategyKind::RandomUniform => "random",
            StrategyKind::TitForTat => "tft",
            StrategyKind::Punisher => "punisher",
            StrategyKind::ForgetfulGrudger => "forgetful_grudger",
            StrategyKind::Prober => "prober",
            StrategyKind::Sneaky => "sneaky",
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StrategyKind {
    type Err = ArenaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        StrategyKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| ArenaError::UnknownKind(s.to_string()))
    }
}

/// Cooperate first, then copy the opponent's most recent move.
pub fn tft_decide(own_history: &[Action], opp_history: &[Action]) -> Action {
    debug_assert_eq!(own_history.len(), opp_history.len());
    opp_history.last().copied().unwrap_or(C)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PunisherState {
    pub grudged: bool,
    pub grudge_rounds_served: u32,
    pub mem_length: u32,
    pub opp_defections: u32,
    pub rounds_seen: u32,
    pub proportionality_factor: u32,
}

impl Default for PunisherState {
    fn default() -> Self {
        PunisherState {
            grudged: false,
            grudge_rounds_served: 0,
            mem_length: 0,
            opp_defections: 0,
            rounds_seen: 0,
            proportionality_factor: 20,
        }
    }
}

/// Defects for a stretch proportional to the opponent's historical defection
/// rate (the triggering move included) each time the opponent defects.
pub fn punisher_decide(st: PunisherState, opp_last: Option<Action>) -> (Action, PunisherState) {
    let Some(opp_last) = opp_last else {
        return (C, st);
    };
    let mut st = st;
    st.rounds_seen += 1;
    if opp_last == D {
        st.opp_defections += 1;
    }
    if st.grudged {
        st.grudge_rounds_served += 1;
        if st.grudge_rounds_served >= st.mem_length {
            st.grudged = false;
            st.grudge_rounds_served = 0;
        }
        return (D, st);
    }
    if opp_last == D {
        let ratio = f64::from(st.opp_defections) / f64::from(st.rounds_seen);
        st.mem_length = ((f64::from(st.proportionality_factor) * ratio).round() as u32).max(1);
        st.grudged = true;
        st.grudge_rounds_served = 0;
        return (D, st);
    }
    (C, st)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ForgetfulGrudgerState {
    pub grudged: bool,
    pub grudge_rounds_served: u32,
    pub grudge_length: u32,
}

impl Default for ForgetfulGrudgerState {
    fn default() -> Self {
        ForgetfulGrudgerState {
            grudged: false,
            grudge_rounds_served: 0,
            grudge_length: 10,
        }
    }
}

/// Defects for `grudge_length` rounds after an opponent defection, then
/// forgets and cooperates until the next one.
pub fn forgetful_grudger_decide(
    st: ForgetfulGrudgerState,
    opp_last: Option<Action>,
) -> (Action, ForgetfulGrudgerState) {
    let mut st = st;
    if !st.grudged && opp_last == Some(D) {
        st.grudged = true;
        st.grudge_rounds_served = 0;
    }
    if st.grudged {
        st.grudge_rounds_served += 1;
        if st.grudge_rounds_served >= st.grudge_length {
            st.grudged = false;
            st.grudge_rounds_served = 0;
        }
        return (D, st);
    }
    (C, st)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProberPhase {
    Probing,
    CooperateFive,
    TitForTat,
    DefectForever,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProberState {
    pub phase: ProberPhase,
    pub probe_sequence: Vec<Action>,
    pub probe_index: usize,
    pub retaliating_defections: u32,
    pub unmerited_defections: u32,
    pub cooperate_five_remaining: u32,
    /// Prober's move in the round before the opponent's last observed move.
    pub own_prev: Option<Action>,
    /// Swap the two outcomes of the end-of-probe test.
    pub invert_condition: bool,
}

impl Default for ProberState {
    fn default() -> Self {
        ProberState {
            phase: ProberPhase::Probing,
            probe_sequence: vec![D, C, C, D, C, C],
            probe_index: 0,
            retaliating_defections: 0,
            unmerited_defections: 0,
            cooperate_five_remaining: 5,
            own_prev: None,
            invert_condition: false,
        }
    }
}

impl ProberState {
    pub fn inverted() -> Self {
        ProberState {
            invert_condition: true,
            ..ProberState::default()
        }
    }
}

/// Plays a fixed probe sequence while counting the opponent's defections as
/// retaliating (Prober had just defected) or unmerited, then settles into
/// cooperate-five-then-TFT or defect-forever.
pub fn prober_decide(
    st: ProberState,
    own_last: Option<Action>,
    opp_last: Option<Action>,
) -> (Action, ProberState) {
    let mut st = st;
    let Some(opp_last) = opp_last else {
        st.probe_index = 1;
        st.own_prev = None;
        return (st.probe_sequence[0], st);
    };
    if st.phase == ProberPhase::Probing && opp_last == D {
        if st.own_prev == Some(D) {
            st.retaliating_defections += 1;
        } else {
            st.unmerited_defections += 1;
        }
    }
    st.own_prev = own_last;

    if st.phase == ProberPhase::Probing {
        if st.probe_index < st.probe_sequence.len() {
            let a = st.probe_sequence[st.probe_index];
            st.probe_index += 1;
            return (a, st);
        }
        let differs = st.retaliating_defections.abs_diff(st.unmerited_defections) > 2;
        st.phase = if differs != st.invert_condition {
            ProberPhase::CooperateFive
        } else {
            ProberPhase::DefectForever
        };
    }
    match st.phase {
        ProberPhase::Probing => unreachable!(),
        ProberPhase::CooperateFive => {
            st.cooperate_five_remaining = st.cooperate_five_remaining.saturating_sub(1);
            if st.cooperate_five_remaining == 0 {
                st.phase = ProberPhase::TitForTat;
            }
            (C, st)
        }
        ProberPhase::TitForTat => (opp_last, st),
        ProberPhase::DefectForever => (D, st),
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SneakyState {
    /// Up to three most recent opponent moves, oldest first.
    pub opp_recent: [Option<Action>; 3],
    pub opp_total_defections: u32,
    pub opp_total_cooperations: u32,
}

impl SneakyState {
    fn push(&mut self, a: Action) {
        self.opp_recent.rotate_left(1);
        self.opp_recent[2] = Some(a);
    }
}

/// Defects after three straight opponent cooperations, or whenever the
/// opponent has defected strictly more often than it cooperated.
pub fn sneaky_decide(st: SneakyState, opp_last: Option<Action>) -> (Action, SneakyState) {
    let Some(opp_last) = opp_last else {
        return (C, st);
    };
    let mut st = st;
    st.push(opp_last);
    match opp_last {
        C => st.opp_total_cooperations += 1,
        D => st.opp_total_defections += 1,
    }
    let three_coops = st.opp_recent.iter().all(|a| *a == Some(C));
    let majority_defect = st.opp_total_defections > st.opp_total_cooperations;
    if three_coops || majority_defect {
        (D, st)
    } else {
        (C, st)
    }
}

#[derive(Clone, Debug, PartialEq)]
enum StrategyState {
    Stateless,
    Punisher(PunisherState),
    ForgetfulGrudger(ForgetfulGrudgerState),
    Prober(ProberState),
    Sneaky(SneakyState),
}

impl StrategyState {
    fn fresh(kind: StrategyKind, invert_prober: bool) -> Self {
        match kind {
            StrategyKind::Punisher => StrategyState::Punisher(PunisherState::default()),
            StrategyKind::ForgetfulGrudger => {
                StrategyState::ForgetfulGrudger(ForgetfulGrudgerState::default())
            }
            StrategyKind::Prober if invert_prober => StrategyState::Prober(ProberState::inverted()),
            StrategyKind::Prober => StrategyState::Prober(ProberState::default()),
            StrategyKind::Sneaky => StrategyState::Sneaky(SneakyState::default()),
            _ => StrategyState::Stateless,
        }
    }
}

/// A static strategy wrapped as a match [`Agent`].
#[derive(Clone, Debug)]
pub struct StaticAgent {
    kind: StrategyKind,
    state: StrategyState,
    invert_prober: bool,
    rng: ChaCha8Rng,
}

impl StaticAgent {
    pub fn new(kind: StrategyKind, seed: u64) -> Self {
        StaticAgent {
            kind,
            state: StrategyState::fresh(kind, false),
            invert_prober: false,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// A Prober whose end-of-probe test is inverted.
    pub fn inverted_prober(seed: u64) -> Self {
        StaticAgent {
            kind: StrategyKind::Prober,
            state: StrategyState::fresh(StrategyKind::Prober, true),
            invert_prober: true,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn kind(&self) -> StrategyKind {
        self.kind
    }

    fn step(&mut self, view: &HistoryWindow) -> Action {
        let opp_last = view.last_opp();
        let own_last = view.last_self();
        match (&mut self.state, self.kind) {
            (_, StrategyKind::AlwaysCooperate) => C,
            (_, StrategyKind::AlwaysDefect) => D,
            (_, StrategyKind::RandomUniform) => {
                if self.rng.gen::<bool>() {
                    D
                } else {
                    C
                }
            }
            (_, StrategyKind::TitForTat) => tft_decide(view.self_actions(), view.opp_actions()),
            (StrategyState::Punisher(st), _) => {
                let (a, next) = punisher_decide(*st, opp_last);
                *st = next;
                a
            }
            (StrategyState::ForgetfulGrudger(st), _) => {
                let (a, next) = forgetful_grudger_decide(*st, opp_last);
                *st = next;
                a
            }
            (StrategyState::Prober(st), _) => {
                let (a, next) = prober_decide(std::mem::take(st), own_last, opp_last);
                *st = next;
                a
            }
            (StrategyState::Sneaky(st), _) => {
                let (a, next) = sneaky_decide(*st, opp_last);
                *st = next;
                a
            }
            (StrategyState::Stateless, _) => unreachable!("stateful kind without state"),
        }
    }
}

impl Agent for StaticAgent {
    fn label(&self) -> String {
        self.kind.name().to_string()
    }

    fn begin_match(&mut self) {
        self.state = StrategyState::fresh(self.kind, self.invert_prober);
    }

    fn decide(&mut self, view: &HistoryWindow, _explore: bool) -> Option<Action> {
        Some(self.step(view))
    }
}

/// A fresh decision source for `kind`. `seed` only matters for
/// [`StrategyKind::RandomUniform`].
pub fn make_strategy(kind: StrategyKind, seed: u64) -> StaticAgent {
    StaticAgent::new(kind, seed)
}

pub fn make_strategy_by_name(name: &str, seed: u64) -> Result<StaticAgent, ArenaError> {
    Ok(make_strategy(name.parse()?, seed))
}
