//! Experiment orchestration: round-robin tournaments, learner head-to-head
//! training and random-encounter societies.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::ArenaError;
use crate::game::{play_match, Action, Agent, HistoryWindow, MatchConfig, MatchResult, PayoffMatrix, Transition};
use crate::learners::{LearnerConfig, LearnerKind, QLearner};
use crate::ltp::{ltp_train, CycleRecord, LtpAgent, LtpConfig, LtpOpponent};
use crate::strategies::{StaticAgent, StrategyKind};

/// What an arena participant is.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum AgentSpec {
    Static(StrategyKind),
    /// Prober with its end-of-probe test inverted.
    InvertedProber,
    Learner(LearnerKind),
    Ltp,
}

impl AgentSpec {
    pub fn name(self) -> &'static str {
        match self {
            AgentSpec::Static(k) => k.name(),
            AgentSpec::InvertedProber => "prober_inverted",
            AgentSpec::Learner(k) => k.name(),
            AgentSpec::Ltp => "ltp",
        }
    }

    pub fn is_static(self) -> bool {
        matches!(self, AgentSpec::Static(_) | AgentSpec::InvertedProber)
    }
}

impl fmt::Display for AgentSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AgentSpec {
    type Err = ArenaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "q" => Ok(AgentSpec::Learner(LearnerKind::Q)),
            "hyper_q" => Ok(AgentSpec::Learner(LearnerKind::HyperQ)),
            "ltp" => Ok(AgentSpec::Ltp),
            "prober_inverted" => Ok(AgentSpec::InvertedProber),
            other => other.parse().map(AgentSpec::Static),
        }
    }
}

impl TryFrom<String> for AgentSpec {
    type Error = ArenaError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<AgentSpec> for String {
    fn from(s: AgentSpec) -> String {
        s.name().to_string()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RosterEntry {
    pub id: String,
    pub spec: AgentSpec,
}

/// Participants of one experiment. Ids are unique.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Roster {
    entries: Vec<RosterEntry>,
}

impl Roster {
    pub fn new(entries: Vec<RosterEntry>) -> Result<Self, ArenaError> {
        let mut r = Roster::default();
        for e in entries {
            r.push(e)?;
        }
        Ok(r)
    }

    pub fn push(&mut self, e: RosterEntry) -> Result<(), ArenaError> {
        if self.entries.iter().any(|x| x.id == e.id) {
            return Err(ArenaError::DuplicateId(e.id));
        }
        self.entries.push(e);
        Ok(())
    }

    pub fn entries(&self) -> &[RosterEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn fresh_id(&self, base: &str) -> String {
        (0..)
            .map(|k| format!("{base}_{k}"))
            .find(|id| self.entries.iter().all(|e| &e.id != id))
            .expect("unbounded id space")
    }
}

/// Appends `count` agents of `kind` under new unique ids.
pub fn inject_agents(roster: &Roster, kind: &str, count: usize) -> Result<Roster, ArenaError> {
    let spec: AgentSpec = kind.parse()?;
    let mut out = roster.clone();
    for _ in 0..count {
        let id = out.fresh_id(spec.name());
        out.push(RosterEntry { id, spec })?;
    }
    Ok(out)
}

/// Every unordered pair once, in lexicographic order.
pub fn round_robin_schedule(roster: &Roster) -> Result<Vec<(usize, usize)>, ArenaError> {
    let n = roster.len();
    if n < 2 {
        return Err(ArenaError::RosterTooSmall(n));
    }
    Ok((0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect())
}

/// One pairing per agent: agent `i` meets an opponent drawn uniformly from
/// the others.
pub fn random_encounter_schedule<R: Rng>(roster: &Roster, rng: &mut R) -> Result<Vec<(usize, usize)>, ArenaError> {
    let n = roster.len();
    if n < 2 {
        return Err(ArenaError::RosterTooSmall(n));
    }
    Ok((0..n)
        .map(|i| {
            let j = rng.gen_range(0..n - 1);
            (i, if j >= i { j + 1 } else { j })
        })
        .collect())
}

/// A live participant.
#[derive(Clone, Debug)]
pub enum ArenaAgent {
    Static(StaticAgent),
    Learner(Box<QLearner>),
    Ltp(Box<LtpAgent>),
}

impl ArenaAgent {
    pub fn as_learner(&self) -> Option<&QLearner> {
        match self {
            ArenaAgent::Learner(l) => Some(l),
            _ => None,
        }
    }

    fn fault(&self) -> Option<ArenaError> {
        self.as_learner().and_then(|l| l.fault()).cloned().map(ArenaError::Learner)
    }

    fn epsilon(&self) -> f64 {
        match self {
            ArenaAgent::Learner(l) => l.epsilon(),
            ArenaAgent::Ltp(a) => a.probe.epsilon_now(),
            ArenaAgent::Static(_) => 0.0,
        }
    }
}

impl Agent for ArenaAgent {
    fn label(&self) -> String {
        match self {
            ArenaAgent::Static(a) => a.label(),
            ArenaAgent::Learner(a) => a.label(),
            ArenaAgent::Ltp(a) => a.label(),
        }
    }

    fn begin_match(&mut self) {
        match self {
            ArenaAgent::Static(a) => a.begin_match(),
            ArenaAgent::Learner(a) => a.begin_match(),
            ArenaAgent::Ltp(a) => a.begin_match(),
        }
    }

    fn decide(&mut self, view: &HistoryWindow, explore: bool) -> Option<Action> {
        match self {
            ArenaAgent::Static(a) => a.decide(view, explore),
            ArenaAgent::Learner(a) => a.decide(view, explore),
            ArenaAgent::Ltp(a) => a.decide(view, explore),
        }
    }

    fn observe(&mut self, t: &Transition) {
        match self {
            ArenaAgent::Static(a) => a.observe(t),
            ArenaAgent::Learner(a) => a.observe(t),
            ArenaAgent::Ltp(a) => a.observe(t),
        }
    }

    fn end_match(&mut self) {
        match self {
            ArenaAgent::Static(a) => a.end_match(),
            ArenaAgent::Learner(a) => a.end_match(),
            ArenaAgent::Ltp(a) => a.end_match(),
        }
    }
}

/// Everything needed to instantiate learners.
#[derive(Clone, Debug, PartialEq)]
pub struct LearnerSetup {
    pub learner: LearnerConfig,
    pub ltp: LtpConfig,
    pub payoff: PayoffMatrix,
}

impl Default for LearnerSetup {
    fn default() -> Self {
        LearnerSetup {
            learner: LearnerConfig::default(),
            ltp: LtpConfig::default(),
            payoff: PayoffMatrix::default(),
        }
    }
}

fn build_agent(entry: &RosterEntry, setup: &LearnerSetup, planned_steps: u64, seed: u64, index: usize) -> ArenaAgent {
    let seed = crate::rng::derive_seed(seed, &[index as u64, crate::rng::label(&entry.id)]);
    match entry.spec {
        AgentSpec::Static(k) => ArenaAgent::Static(StaticAgent::new(k, seed)),
        AgentSpec::InvertedProber => ArenaAgent::Static(StaticAgent::inverted_prober(seed)),
        AgentSpec::Learner(k) => {
            ArenaAgent::Learner(Box::new(QLearner::new(entry.id.clone(), k, &setup.learner, planned_steps, seed)))
        }
        AgentSpec::Ltp => ArenaAgent::Ltp(Box::new(LtpAgent::new(entry.id.clone(), &setup.ltp, &setup.learner, setup.payoff, seed))),
    }
}

fn learner_checkpoints(agents: &[ArenaAgent]) -> Vec<(String, Vec<u8>)> {
    agents
        .iter()
        .filter_map(ArenaAgent::as_learner)
        .map(|l| (l.id().to_string(), crate::learners::learner_to_bytes(l)))
        .collect()
}

fn pair_mut<T>(v: &mut [T], i: usize, j: usize) -> (&mut T, &mut T) {
    assert_ne!(i, j, "an agent cannot meet itself");
    if i < j {
        let (lo, hi) = v.split_at_mut(j);
        (&mut lo[i], &mut hi[0])
    } else {
        let (lo, hi) = v.split_at_mut(i);
        (&mut hi[0], &mut lo[j])
    }
}

fn checked_match(a: &mut ArenaAgent, b: &mut ArenaAgent, cfg: &MatchConfig, learning: bool) -> Result<MatchResult, ArenaError> {
    let r = play_match(a, b, cfg, learning);
    if let Some(e) = a.fault().or_else(|| b.fault()) {
        return Err(e);
    }
    Ok(r?)
}

/// One training-curve row: `episode,agent_id,cum_reward,coop_rate,epsilon`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub episode: usize,
    pub agent_id: String,
    pub cum_reward: f64,
    pub coop_rate: f64,
    pub epsilon: f64,
}

/// Per-episode totals for the agents that played.
#[derive(Clone, Debug, Default)]
struct EpisodeTally {
    reward: Vec<f64>,
    coop: Vec<usize>,
    rounds: Vec<usize>,
}

impl EpisodeTally {
    fn new(n: usize) -> Self {
        EpisodeTally {
            reward: vec![0.0; n],
            coop: vec![0; n],
            rounds: vec![0; n],
        }
    }

    fn add(&mut self, i: usize, j: usize, r: &MatchResult) {
        let steps = r.steps();
        self.reward[i] += f64::from(r.cumulative_self);
        self.reward[j] += f64::from(r.cumulative_opp);
        self.coop[i] += (r.cooperation_rate_self * steps as f64).round() as usize;
        self.coop[j] += (r.cooperation_rate_opp * steps as f64).round() as usize;
        self.rounds[i] += steps;
        self.rounds[j] += steps;
    }

    fn emit(&self, episode: usize, agents: &[ArenaAgent], sink: &mut dyn FnMut(&CurveRow)) {
        for (k, a) in agents.iter().enumerate() {
            if self.rounds[k] == 0 || !matches!(a, ArenaAgent::Learner(_)) {
                continue;
            }
            sink(&CurveRow {
                episode,
                agent_id: a.label(),
                cum_reward: self.reward[k],
                coop_rate: self.coop[k] as f64 / self.rounds[k] as f64,
                epsilon: a.epsilon(),
            });
        }
    }
}

/// Columns of the score table, in order.
pub const SCORE_COLUMNS: [StrategyKind; 5] = [
    StrategyKind::TitForTat,
    StrategyKind::Punisher,
    StrategyKind::Prober,
    StrategyKind::Sneaky,
    StrategyKind::ForgetfulGrudger,
];

pub const SCORE_HEADERS: [&str; 5] = ["tft", "punisher", "prober", "sneaky", "fg"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TournamentConfig {
    pub match_steps: usize,
    pub episodes: usize,
    pub eval_matches: usize,
}

impl Default for TournamentConfig {
    fn default() -> Self {
        TournamentConfig {
            match_steps: 100,
            episodes: 10_000,
            eval_matches: 20,
        }
    }
}

/// Average greedy scores of one learner against each static column.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreRow {
    pub agent: String,
    pub scores: [f64; 5],
    /// Score against Prober with the inverted end-of-probe test.
    pub prober_inverted: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TournamentOutcome {
    pub scores: Vec<ScoreRow>,
    pub ltp_cycles: Vec<CycleRecord>,
    /// Serialized trained agents, keyed by file stem.
    pub checkpoints: Vec<(String, Vec<u8>)>,
}

/// Average greedy score of `agent` over `matches` fresh matches against `opp`.
pub fn evaluate_against(
    agent: &mut ArenaAgent,
    opp: AgentSpec,
    steps: usize,
    matches: usize,
    payoff: PayoffMatrix,
    seed: u64,
) -> Result<f64, ArenaError> {
    let cfg = MatchConfig::new(steps, payoff, seed)?;
    let mut total = 0.0;
    for m in 0..matches.max(1) {
        let s = crate::rng::derive_seed(seed, &[m as u64]);
        let mut o = match opp {
            AgentSpec::InvertedProber => ArenaAgent::Static(StaticAgent::inverted_prober(s)),
            AgentSpec::Static(k) => ArenaAgent::Static(StaticAgent::new(k, s)),
            _ => return Err(ArenaError::UnknownKind(opp.name().to_string())),
        };
        total += f64::from(checked_match(agent, &mut o, &cfg, false)?.cumulative_self);
    }
    Ok(total / matches.max(1) as f64)
}

/// Round-robin training of every learner in `roster` for `cfg.episodes`,
/// followed by greedy evaluation against each static column. Probe/player
/// entries are trained separately against each column's opponent.
pub fn run_tournament(
    roster: &Roster,
    cfg: &TournamentConfig,
    setup: &LearnerSetup,
    seed: u64,
    curves: &mut dyn FnMut(&CurveRow),
) -> Result<TournamentOutcome, ArenaError> {
    if cfg.episodes == 0 {
        return Err(ArenaError::Game(crate::error::GameError::InvalidSteps));
    }
    let schedule = round_robin_schedule(roster)?;
    let n = roster.len();
    let planned = (cfg.episodes * (n - 1) * cfg.match_steps) as u64;
    let mut agents: Vec<ArenaAgent> = roster
        .entries()
        .iter()
        .enumerate()
        .map(|(k, e)| build_agent(e, setup, planned, seed, k))
        .collect();
    let match_cfg = MatchConfig::new(cfg.match_steps, setup.payoff, seed)?;
    let trains = |e: &RosterEntry| matches!(e.spec, AgentSpec::Learner(_));
    let any_learner = roster.entries().iter().any(trains);
    if any_learner {
        for episode in 0..cfg.episodes {
            let mut tally = EpisodeTally::new(n);
            for &(i, j) in &schedule {
                if !trains(&roster.entries()[i]) && !trains(&roster.entries()[j]) {
                    continue;
                }
                if matches!(roster.entries()[i].spec, AgentSpec::Ltp) || matches!(roster.entries()[j].spec, AgentSpec::Ltp) {
                    continue;
                }
                let (a, b) = pair_mut(&mut agents, i, j);
                let r = checked_match(a, b, &match_cfg, true)?;
                tally.add(i, j, &r);
            }
            tally.emit(episode, &agents, curves);
        }
    }

    let mut outcome = TournamentOutcome::default();
    let eval_seed = crate::rng::derive_seed(seed, &[0xe7a1]);
    for (k, entry) in roster.entries().iter().enumerate() {
        match entry.spec {
            AgentSpec::Learner(_) => {
                let agent = &mut agents[k];
                let mut scores = [0.0; 5];
                for (c, kind) in SCORE_COLUMNS.iter().enumerate() {
                    scores[c] = evaluate_against(agent, AgentSpec::Static(*kind), cfg.match_steps, cfg.eval_matches, setup.payoff, eval_seed)?;
                }
                let prober_inverted = evaluate_against(agent, AgentSpec::InvertedProber, cfg.match_steps, cfg.eval_matches, setup.payoff, eval_seed)?;
                if let ArenaAgent::Learner(l) = agent {
                    outcome.checkpoints.push((entry.id.clone(), crate::learners::learner_to_bytes(l)));
                }
                outcome.scores.push(ScoreRow { agent: entry.id.clone(), scores, prober_inverted });
            }
            AgentSpec::Ltp => {
                let mut scores = [0.0; 5];
                let mut ltp_cfg = setup.ltp.clone();
                ltp_cfg.match_steps = cfg.match_steps;
                let ltp_setup = LearnerSetup { ltp: ltp_cfg, ..setup.clone() };
                let columns = SCORE_COLUMNS.iter().map(|&c| AgentSpec::Static(c)).chain([AgentSpec::InvertedProber]);
                let mut prober_inverted = 0.0;
                for (c, opp) in columns.enumerate() {
                    let ArenaAgent::Ltp(mut ltp) = build_agent(entry, &ltp_setup, 0, seed, k * 8 + c) else {
                        unreachable!("ltp entry builds an ltp agent");
                    };
                    let target = match opp {
                        AgentSpec::Static(kind) => LtpOpponent::Static(kind),
                        _ => LtpOpponent::InvertedProber,
                    };
                    let mut rows = Vec::new();
                    ltp_train(&mut ltp, target, &mut |r| rows.push(r.clone()))?;
                    for r in &mut rows {
                        r.agent_id = format!("{}@{}", entry.id, opp.name());
                    }
                    outcome.ltp_cycles.extend(rows);
                    outcome.checkpoints.push((format!("{}@{}", entry.id, opp.name()), crate::ltp::ltp_to_bytes(&ltp)));
                    let mut agent = ArenaAgent::Ltp(ltp);
                    let s = evaluate_against(&mut agent, opp, cfg.match_steps, cfg.eval_matches, setup.payoff, eval_seed)?;
                    if c < 5 {
                        scores[c] = s;
                    } else {
                        prober_inverted = s;
                    }
                }
                outcome.scores.push(ScoreRow { agent: entry.id.clone(), scores, prober_inverted });
            }
            _ => {}
        }
    }
    Ok(outcome)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeadToHeadConfig {
    pub episodes: usize,
    pub match_steps: usize,
    /// Episodes between greedy evaluations.
    pub eval_every: usize,
}

impl Default for HeadToHeadConfig {
    fn default() -> Self {
        HeadToHeadConfig {
            episodes: 5_000,
            match_steps: 20,
            eval_every: 50,
        }
    }
}

/// A greedy evaluation match between the two learners.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalPoint {
    pub episode: usize,
    pub reward: [f64; 2],
    pub coop_rate: [f64; 2],
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct HeadToHeadOutcome {
    pub evals: Vec<EvalPoint>,
    pub checkpoints: Vec<(String, Vec<u8>)>,
}

impl HeadToHeadOutcome {
    /// First evaluation index after which agent `k`'s cooperation rate stays
    /// below 0.5 for the rest of the run.
    pub fn settles_below_half(&self, k: usize) -> Option<usize> {
        let last_high = self.evals.iter().rposition(|e| e.coop_rate[k] >= 0.5);
        match last_high {
            None => Some(0),
            Some(i) if i + 1 < self.evals.len() => Some(i + 1),
            Some(_) => None,
        }
    }

    /// Mean cooperation rate of agent `k` over the last `rounds` evaluation
    /// rounds.
    pub fn final_coop_rate(&self, k: usize, rounds: usize, match_steps: usize) -> f64 {
        let n = (rounds / match_steps.max(1)).max(1).min(self.evals.len());
        let tail = &self.evals[self.evals.len() - n..];
        tail.iter().map(|e| e.coop_rate[k]).sum::<f64>() / n as f64
    }
}

/// Two learners of the given kinds trained against each other, with a
/// greedy evaluation match every `eval_every` episodes and after the last.
pub fn run_head_to_head(
    kinds: [LearnerKind; 2],
    cfg: &HeadToHeadConfig,
    setup: &LearnerSetup,
    seed: u64,
    curves: &mut dyn FnMut(&CurveRow),
) -> Result<HeadToHeadOutcome, ArenaError> {
    let roster = Roster::new(vec![
        RosterEntry { id: format!("{}_a", kinds[0].name()), spec: AgentSpec::Learner(kinds[0]) },
        RosterEntry { id: format!("{}_b", kinds[1].name()), spec: AgentSpec::Learner(kinds[1]) },
    ])?;
    let planned = (cfg.episodes * cfg.match_steps) as u64;
    let mut agents: Vec<ArenaAgent> = roster
        .entries()
        .iter()
        .enumerate()
        .map(|(k, e)| build_agent(e, setup, planned, seed, k))
        .collect();
    let match_cfg = MatchConfig::new(cfg.match_steps, setup.payoff, seed)?;
    let mut out = HeadToHeadOutcome::default();
    let every = cfg.eval_every.max(1);
    for episode in 0..cfg.episodes {
        let (a, b) = pair_mut(&mut agents, 0, 1);
        let r = checked_match(a, b, &match_cfg, true)?;
        let mut tally = EpisodeTally::new(2);
        tally.add(0, 1, &r);
        tally.emit(episode, &agents, curves);
        if (episode + 1) % every == 0 || episode + 1 == cfg.episodes {
            let (a, b) = pair_mut(&mut agents, 0, 1);
            let e = checked_match(a, b, &match_cfg, false)?;
            out.evals.push(EvalPoint {
                episode: episode + 1,
                reward: [f64::from(e.cumulative_self), f64::from(e.cumulative_opp)],
                coop_rate: [e.cooperation_rate_self, e.cooperation_rate_opp],
            });
        }
    }
    out.checkpoints = learner_checkpoints(&agents);
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SocietyConfig {
    pub match_steps: usize,
    pub episodes: usize,
    /// Episodes between Q-value snapshots.
    pub snapshot_every: usize,
}

impl Default for SocietyConfig {
    fn default() -> Self {
        SocietyConfig {
            match_steps: 20,
            episodes: 20_000,
            snapshot_every: 100,
        }
    }
}

/// Q-values of one learner in the all-cooperate and all-defect histories.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QSnapshot {
    pub episode: usize,
    pub agent_id: String,
    pub all_c: [f64; 2],
    pub all_d: [f64; 2],
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SocietyOutcome {
    /// Mutual cooperation rate of a greedy match between the first two
    /// learners, after training.
    pub learner_mutual_coop: f64,
    pub learner_rewards: [f64; 2],
    pub snapshots: Vec<QSnapshot>,
    /// `encounters[i][j]`: matches in which `i` was focal and drew `j`.
    pub encounters: Vec<Vec<u64>>,
    pub checkpoints: Vec<(String, Vec<u8>)>,
}

/// Random-encounter training. Every agent is focal once per episode; learners
/// learn from every match they take part in. Matches between two static
/// agents are skipped, since they change nothing.
pub fn run_society(
    roster: &Roster,
    cfg: &SocietyConfig,
    setup: &LearnerSetup,
    seed: u64,
    curves: &mut dyn FnMut(&CurveRow),
) -> Result<SocietyOutcome, ArenaError> {
    let n = roster.len();
    if n < 2 {
        return Err(ArenaError::RosterTooSmall(n));
    }
    let planned = (2 * cfg.episodes * cfg.match_steps) as u64;
    let mut agents: Vec<ArenaAgent> = roster
        .entries()
        .iter()
        .enumerate()
        .map(|(k, e)| build_agent(e, setup, planned, seed, k))
        .collect();
    let learners: Vec<usize> = (0..n).filter(|&k| matches!(agents[k], ArenaAgent::Learner(_))).collect();
    let match_cfg = MatchConfig::new(cfg.match_steps, setup.payoff, seed)?;
    let mut rng = crate::rng::stream(seed, &[0x50c1]);
    let mut out = SocietyOutcome {
        encounters: vec![vec![0; n]; n],
        ..Default::default()
    };
    let snapshot = |agents: &[ArenaAgent], episode: usize, out: &mut SocietyOutcome| -> Result<(), ArenaError> {
        for &k in &learners {
            let l = agents[k].as_learner().expect("learner index");
            out.snapshots.push(QSnapshot {
                episode,
                agent_id: l.id().to_string(),
                all_c: l.q_values(0)?,
                all_d: l.q_values(255)?,
            });
        }
        Ok(())
    };
    for episode in 0..cfg.episodes {
        let schedule = random_encounter_schedule(roster, &mut rng)?;
        let mut tally = EpisodeTally::new(n);
        for (i, j) in schedule {
            out.encounters[i][j] += 1;
            if agents[i].as_learner().is_none() && agents[j].as_learner().is_none() {
                continue;
            }
            let (a, b) = pair_mut(&mut agents, i, j);
            let r = checked_match(a, b, &match_cfg, true)?;
            tally.add(i, j, &r);
        }
        tally.emit(episode, &agents, curves);
        if cfg.snapshot_every > 0 && (episode + 1) % cfg.snapshot_every == 0 {
            snapshot(&agents, episode + 1, &mut out)?;
        }
    }
    if let [x, y, ..] = learners[..] {
        let (a, b) = pair_mut(&mut agents, x, y);
        let r = checked_match(a, b, &match_cfg, false)?;
        out.learner_mutual_coop = r.mutual_cooperation_rate();
        out.learner_rewards = [f64::from(r.cumulative_self), f64::from(r.cumulative_opp)];
    }
    out.checkpoints = learner_checkpoints(&agents);
    Ok(out)
}

/// `count` learners of `kind` followed by the given static groups.
pub fn society_roster(learner: LearnerKind, count: usize, statics: &[(AgentSpec, usize)]) -> Result<Roster, ArenaError> {
    let mut r = Roster::default();
    for k in 0..count {
        r.push(RosterEntry { id: format!("{}_{k}", learner.name()), spec: AgentSpec::Learner(learner) })?;
    }
    for &(spec, c) in statics {
        r = inject_agents(&r, spec.name(), c)?;
    }
    Ok(r)
}
