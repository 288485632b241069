//! Experiment configuration documents (TOML).

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::arena::{AgentSpec, HeadToHeadConfig, Roster, RosterEntry, SocietyConfig, TournamentConfig};
use crate::error::ConfigError;
use crate::game::PayoffMatrix;
use crate::learners::{BackendKind, LearnerConfig, LearnerKind};
use crate::ltp::LtpConfig;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Tournament,
    HeadToHead,
    EtaSweep,
    Society,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Tournament => "tournament",
            Mode::HeadToHead => "head_to_head",
            Mode::EtaSweep => "eta_sweep",
            Mode::Society => "society",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TournamentSection {
    /// Agent kinds; ids are assigned as `<kind>_<n>`.
    pub roster: Vec<AgentSpec>,
    pub match_steps: usize,
    pub episodes: usize,
    pub eval_matches: usize,
}

impl Default for TournamentSection {
    fn default() -> Self {
        let d = TournamentConfig::default();
        TournamentSection {
            roster: Vec::new(),
            match_steps: d.match_steps,
            episodes: d.episodes,
            eval_matches: d.eval_matches,
        }
    }
}

impl TournamentSection {
    pub fn arena(&self) -> TournamentConfig {
        TournamentConfig {
            match_steps: self.match_steps,
            episodes: self.episodes,
            eval_matches: self.eval_matches,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeadToHeadSection {
    pub pair: [LearnerKind; 2],
    pub episodes: usize,
    pub match_steps: usize,
    pub eval_every: usize,
}

impl Default for HeadToHeadSection {
    fn default() -> Self {
        let d = HeadToHeadConfig::default();
        HeadToHeadSection {
            pair: [LearnerKind::Q, LearnerKind::Q],
            episodes: d.episodes,
            match_steps: d.match_steps,
            eval_every: d.eval_every,
        }
    }
}

impl HeadToHeadSection {
    pub fn arena(&self) -> HeadToHeadConfig {
        HeadToHeadConfig {
            episodes: self.episodes,
            match_steps: self.match_steps,
            eval_every: self.eval_every,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EtaSweepSection {
    pub etas: Vec<f64>,
}

impl Default for EtaSweepSection {
    fn default() -> Self {
        EtaSweepSection {
            etas: vec![0.01, 0.5, 0.7, 0.99],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SocietySection {
    pub learner: LearnerKind,
    pub learners: usize,
    /// One run per entry, each adding that many TFT agents.
    pub tft_counts: Vec<usize>,
    /// Further static agents present in every run.
    pub extra: Vec<AgentSpec>,
    pub match_steps: usize,
    pub episodes: usize,
    pub snapshot_every: usize,
}

impl Default for SocietySection {
    fn default() -> Self {
        let d = SocietyConfig::default();
        SocietySection {
            learner: LearnerKind::Q,
            learners: 2,
            tft_counts: vec![0, 2, 4, 6],
            extra: Vec::new(),
            match_steps: d.match_steps,
            episodes: d.episodes,
            snapshot_every: d.snapshot_every,
        }
    }
}

impl SocietySection {
    pub fn arena(&self) -> SocietyConfig {
        SocietyConfig {
            match_steps: self.match_steps,
            episodes: self.episodes,
            snapshot_every: self.snapshot_every,
        }
    }

    pub fn roster(&self, tft: usize) -> Result<Roster, crate::error::ArenaError> {
        let mut statics = vec![(AgentSpec::Static(crate::strategies::StrategyKind::TitForTat), tft)];
        statics.extend(self.extra.iter().map(|&s| (s, 1)));
        crate::arena::society_roster(self.learner, self.learners, &statics)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    #[serde(default = "default_run_id")]
    pub run_id: String,
    pub seeds: Vec<u64>,
    /// Output directory; the CLI flag and environment variable take precedence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub payoff: PayoffMatrix,
    #[serde(default)]
    pub learner: LearnerConfig,
    #[serde(default)]
    pub ltp: LtpConfig,
    #[serde(default)]
    pub tournament: TournamentSection,
    #[serde(default)]
    pub head_to_head: HeadToHeadSection,
    #[serde(default)]
    pub eta_sweep: EtaSweepSection,
    #[serde(default)]
    pub society: SocietySection,
}

fn default_run_id() -> String {
    "run".to_string()
}

impl ExperimentConfig {
    pub fn new(mode: Mode, seeds: Vec<u64>) -> Self {
        ExperimentConfig {
            mode,
            run_id: default_run_id(),
            seeds,
            out: None,
            payoff: PayoffMatrix::default(),
            learner: LearnerConfig::default(),
            ltp: LtpConfig::default(),
            tournament: TournamentSection::default(),
            head_to_head: HeadToHeadSection::default(),
            eta_sweep: EtaSweepSection::default(),
            society: SocietySection::default(),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn tournament_roster(&self) -> Result<Roster, ConfigError> {
        let mut r = Roster::default();
        for spec in &self.tournament.roster {
            r = crate::arena::inject_agents(&r, spec.name(), 1)
                .map_err(|e| ConfigError::invalid("tournament.roster", e.to_string()))?;
        }
        Ok(r)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.seeds.is_empty() {
            return Err(ConfigError::invalid("seeds", "at least one seed is required"));
        }
        if self.run_id.is_empty() || self.run_id.contains(['/', '\\']) {
            return Err(ConfigError::invalid("run_id", "must be a non-empty file-name component"));
        }
        self.payoff
            .validate()
            .map_err(|e| ConfigError::invalid("payoff", e.to_string()))?;
        validate_learner(&self.learner)?;
        match self.mode {
            Mode::Tournament => {
                let t = &self.tournament;
                positive("tournament.match_steps", t.match_steps)?;
                positive("tournament.episodes", t.episodes)?;
                positive("tournament.eval_matches", t.eval_matches)?;
                if t.roster.len() < 2 {
                    return Err(ConfigError::invalid("tournament.roster", "needs at least two agents"));
                }
                if t.roster.contains(&AgentSpec::Ltp) {
                    validate_ltp(&self.ltp, "ltp.eta", self.ltp.eta)?;
                }
            }
            Mode::HeadToHead => {
                let h = &self.head_to_head;
                positive("head_to_head.episodes", h.episodes)?;
                positive("head_to_head.match_steps", h.match_steps)?;
                positive("head_to_head.eval_every", h.eval_every)?;
            }
            Mode::EtaSweep => {
                if self.eta_sweep.etas.is_empty() {
                    return Err(ConfigError::invalid("eta_sweep.etas", "at least one value is required"));
                }
                validate_ltp(&self.ltp, "ltp.eta", self.ltp.eta)?;
                for (k, &eta) in self.eta_sweep.etas.iter().enumerate() {
                    unit_interval(&format!("eta_sweep.etas[{k}]"), eta)?;
                }
            }
            Mode::Society => {
                let s = &self.society;
                positive("society.match_steps", s.match_steps)?;
                positive("society.episodes", s.episodes)?;
                if s.tft_counts.is_empty() {
                    return Err(ConfigError::invalid("society.tft_counts", "at least one value is required"));
                }
                if s.learners < 2 {
                    return Err(ConfigError::invalid("society.learners", "needs at least two learners"));
                }
                if s.extra.iter().any(|e| !e.is_static()) {
                    return Err(ConfigError::invalid("society.extra", "only static agents may be added"));
                }
            }
        }
        let hyper_q = LearnerKind::HyperQ;
        let uses_hyper_q = match self.mode {
            Mode::Tournament => self.tournament.roster.contains(&AgentSpec::Learner(hyper_q)),
            Mode::HeadToHead => self.head_to_head.pair.contains(&hyper_q),
            Mode::Society => self.society.learner == hyper_q,
            Mode::EtaSweep => false,
        };
        if uses_hyper_q && self.learner.backend == BackendKind::Tabular {
            // The opponent model's prediction is a continuous input.
            return Err(ConfigError::invalid("learner.backend", "hyper_q needs the neural backend"));
        }
        Ok(())
    }
}

fn positive(path: &str, v: usize) -> Result<(), ConfigError> {
    if v == 0 {
        return Err(ConfigError::invalid(path, "must be at least 1"));
    }
    Ok(())
}

fn positive_f(path: &str, v: f64) -> Result<(), ConfigError> {
    if !(v.is_finite() && v > 0.0) {
        return Err(ConfigError::invalid(path, format!("must be positive and finite, got {v}")));
    }
    Ok(())
}

fn unit_interval(path: &str, v: f64) -> Result<(), ConfigError> {
    if !(0.0..=1.0).contains(&v) {
        return Err(ConfigError::invalid(path, format!("must lie in [0, 1], got {v}")));
    }
    Ok(())
}

fn validate_learner(l: &LearnerConfig) -> Result<(), ConfigError> {
    if !(0.0..1.0).contains(&l.gamma) {
        return Err(ConfigError::invalid("learner.gamma", format!("must lie in [0, 1), got {}", l.gamma)));
    }
    positive_f("learner.learning_rate", l.learning_rate)?;
    positive("learner.batch_size", l.batch_size)?;
    positive("learner.buffer_capacity", l.buffer_capacity)?;
    positive("learner.target_sync", l.target_sync as usize)?;
    positive("learner.train_every", l.train_every as usize)?;
    positive("learner.recent_window", l.recent_window)?;
    unit_interval("learner.epsilon_start", l.epsilon_start)?;
    unit_interval("learner.epsilon_end", l.epsilon_end)?;
    if l.epsilon_end > l.epsilon_start {
        return Err(ConfigError::invalid("learner.epsilon_end", "must not exceed epsilon_start"));
    }
    if let Some(d) = l.epsilon_decay_steps {
        positive("learner.epsilon_decay_steps", d as usize)?;
    }
    if l.hidden.is_empty() || l.hidden.contains(&0) {
        return Err(ConfigError::invalid("learner.hidden", "needs at least one non-empty layer"));
    }
    if let Some(lr) = l.opponent_learning_rate {
        positive_f("learner.opponent_learning_rate", lr)?;
    }
    Ok(())
}

fn validate_ltp(c: &LtpConfig, eta_path: &str, eta: f64) -> Result<(), ConfigError> {
    unit_interval(eta_path, eta)?;
    positive("ltp.horizon", c.horizon)?;
    positive("ltp.probe_phase_steps", c.probe_phase_steps)?;
    positive("ltp.rollouts_per_cycle", c.rollouts_per_cycle)?;
    positive("ltp.cycles", c.cycles)?;
    positive("ltp.group_capacity", c.group_capacity)?;
    positive("ltp.eval_matches", c.eval_matches)?;
    if c.match_steps < c.horizon {
        return Err(ConfigError::invalid("ltp.match_steps", "must be at least the rollout horizon"));
    }
    if let Some(lr) = c.rollout_learning_rate {
        if !(lr.is_finite() && lr >= 0.0) {
            return Err(ConfigError::invalid("ltp.rollout_learning_rate", "must be non-negative and finite"));
        }
    }
    if let Some(e) = c.rollout_first_move_epsilon {
        if !(0.0..=1.0).contains(&e) {
            return Err(ConfigError::invalid("ltp.rollout_first_move_epsilon", "must lie in [0, 1]"));
        }
    }
    Ok(())
}

/// Parses and validates a configuration document; omitted hyperparameters
/// take their defaults.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

/// Roster entries for a learner pair, used by head-to-head runs.
pub fn pair_roster(pair: [LearnerKind; 2]) -> Vec<RosterEntry> {
    pair.iter()
        .enumerate()
        .map(|(k, &kind)| RosterEntry {
            id: format!("{}_{}", kind.name(), k),
            spec: AgentSpec::Learner(kind),
        })
        .collect()
}
