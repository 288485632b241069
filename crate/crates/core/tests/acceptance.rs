//! Acceptance gate. Runs every criterion at its reduced protocol and prints
//! one PASS/FAIL line each. `ACCEPTANCE_ONLY=3,7` restricts the run to the
//! listed criteria.

use std::path::Path;
use std::time::Instant;

use rand::Rng;

use probe_arena::arena::{
    run_head_to_head, run_society, run_tournament, society_roster, AgentSpec, HeadToHeadConfig, LearnerSetup, Roster,
    RosterEntry, SocietyConfig, TournamentConfig,
};
use probe_arena::config::{ExperimentConfig, Mode};
use probe_arena::game::{play_match, Agent, HistoryWindow, MatchConfig, Transition};
use probe_arena::learners::{BackendKind, LearnerConfig, LearnerKind, QLearner};
use probe_arena::ltp::{
    emit_adjusted_experience, ltp_train, train_player, LtpAgent, LtpConfig, LtpOpponent, Trajectory, TrajectoryStep,
};
use probe_arena::neural::gradcheck::{check_cross_entropy_gradients, check_q_gradients, GradcheckConfig};
use probe_arena::rng::derive_seed;
use probe_arena::run::{run_seed, METRICS};
use probe_arena::strategies::{make_strategy, StrategyKind};
use probe_arena::{Action, PayoffMatrix};

use Action::{Cooperate as C, Defect as D};

const SEEDS: [u64; 5] = [1, 2, 3, 4, 5];
const QUORUM: usize = 4;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn count(xs: &[bool]) -> usize {
    xs.iter().filter(|&&x| x).count()
}

fn marks(xs: &[bool]) -> String {
    xs.iter().map(|&x| if x { '+' } else { '-' }).collect()
}

fn within(x: f64, target: f64, tol: f64) -> bool {
    (x - target).abs() <= tol
}

// 1. Analytic vs finite-difference gradients.
fn gradients() -> Verdict {
    let t = Instant::now();
    let cfg = GradcheckConfig::default();
    let q = check_q_gradients(&cfg);
    let ce = check_cross_entropy_gradients(&cfg);
    let secs = t.elapsed().as_secs_f64();
    verdict(
        q.passed() && ce.passed() && secs < 10.0,
        format!(
            "{} probes; td max rel err {:.2e} ({} failures), cross-entropy {:.2e} ({} failures); {secs:.1}s",
            cfg.probes, q.max_rel_error, q.failures, ce.max_rel_error, ce.failures
        ),
    )
}

// 2. η = 0 with one-step rollouts reduces to plain Q-learning, bitwise.
fn eta_zero() -> Verdict {
    let t = Instant::now();
    let learner = LearnerConfig::default();
    let payoff = PayoffMatrix::default();
    let steps = 1_000;
    let mut q = QLearner::new("q", LearnerKind::Q, &learner, steps, 42);
    let cfg = LtpConfig { eta: 0.0, horizon: 1, ..LtpConfig::default() };
    let mut ltp = LtpAgent::new("ltp", &cfg, &learner, payoff, 42);
    let mut opp = make_strategy(StrategyKind::TitForTat, 0);
    let mut rng = probe_arena::rng::stream(7, &[]);
    let mut history = HistoryWindow::new();
    let mut first_diff = None;
    for step in 0..steps {
        if step % 100 == 0 {
            history = HistoryWindow::new();
            opp.begin_match();
        }
        let act = Action::from_index(rng.gen_range(0..2)).unwrap();
        let opp_act = opp.decide(&history.swapped(), true).unwrap();
        let (r, _) = payoff.payoff(act, opp_act);
        let next = history.push_round(act, opp_act);
        q.learn(&Transition { state: history, action: act, opp_action: opp_act, reward: r, next_state: next }).unwrap();
        let tau = Trajectory {
            steps: vec![TrajectoryStep { state: history.state_index(), action: act, reward: r, next_state: next.state_index() }],
        };
        ltp.player.ingest(emit_adjusted_experience(&tau, cfg.eta).unwrap());
        if ltp.player.buffer.len() >= ltp.player.batch_size() {
            train_player(&mut ltp.player).unwrap();
        }
        if first_diff.is_none() && (q.online() != &ltp.player.online || q.target() != &ltp.player.target.params) {
            first_diff = Some(step);
        }
        history = next;
    }
    let secs = t.elapsed().as_secs_f64();
    let updates = ltp.player.updates();
    verdict(
        first_diff.is_none() && updates == q.updates() && updates > 0 && secs < 60.0,
        match first_diff {
            None => format!("{steps} steps, {updates} updates, parameters bitwise equal; {secs:.1}s"),
            Some(s) => format!("parameters diverged at step {s}"),
        },
    )
}

fn tournament_score(spec: AgentSpec, opp: StrategyKind, setup: &LearnerSetup, episodes: usize, seed: u64) -> (f64, f64) {
    let roster = Roster::new(vec![
        RosterEntry { id: spec.name().into(), spec },
        RosterEntry { id: opp.name().into(), spec: AgentSpec::Static(opp) },
    ])
    .unwrap();
    let cfg = TournamentConfig { episodes, ..TournamentConfig::default() };
    let out = run_tournament(&roster, &cfg, setup, seed, &mut |_| {}).unwrap();
    let col = probe_arena::arena::SCORE_COLUMNS.iter().position(|&k| k == opp).unwrap();
    (out.scores[0].scores[col], out.scores[0].prober_inverted)
}

fn static_opponents(spec: AgentSpec, setup: &LearnerSetup, episodes: usize, sneaky_band: (f64, f64), limit_secs: f64) -> Verdict {
    let mut parts = Vec::new();
    let mut all = true;
    for opp in [StrategyKind::TitForTat, StrategyKind::Punisher, StrategyKind::ForgetfulGrudger, StrategyKind::Sneaky] {
        let t = Instant::now();
        let scores: Vec<f64> = SEEDS.iter().map(|&s| tournament_score(spec, opp, setup, episodes, s).0).collect();
        let secs = t.elapsed().as_secs_f64() / SEEDS.len() as f64;
        let ok: Vec<bool> = scores
            .iter()
            .map(|&x| match opp {
                StrategyKind::Sneaky => x >= sneaky_band.0 && x <= sneaky_band.1,
                _ => within(x, 300.0, 5.0),
            })
            .collect();
        let pass = count(&ok) >= QUORUM && secs < limit_secs;
        all &= pass;
        let shown: Vec<String> = scores.iter().map(|x| format!("{x:.0}")).collect();
        parts.push(format!("{} [{}] {} {:.0}s/seed", opp.name(), shown.join(" "), marks(&ok), secs));
    }
    verdict(all, parts.join("; "))
}

// 3. Tabular Q best-responds to stationary opponents.
fn q_vs_statics() -> Verdict {
    let setup = LearnerSetup { learner: LearnerConfig::tabular(0.1), ..LearnerSetup::default() };
    static_opponents(AgentSpec::Learner(LearnerKind::Q), &setup, 2_000, (366.7, 400.0), 600.0)
}

/// Next-move prediction accuracy of a Hyper-Q opponent model after
/// `episodes` 100-round matches against TFT, on the newest experiences.
fn opponent_model_accuracy(episodes: usize, seed: u64) -> f64 {
    let cfg = LearnerConfig::default();
    let mut l = QLearner::new("hyper_q", LearnerKind::HyperQ, &cfg, (episodes * 100) as u64, seed);
    let mut tft = make_strategy(StrategyKind::TitForTat, 0);
    let mc = MatchConfig::new(100, PayoffMatrix::default(), 0).unwrap();
    for _ in 0..episodes {
        play_match(&mut l, &mut tft, &mc, true).unwrap();
    }
    let n = l.buffer().len();
    let recent = l.buffer().iter().skip(n.saturating_sub(cfg.recent_window));
    l.opponent_model().unwrap().accuracy(recent).unwrap()
}

// 4. Neural Hyper-Q exploits Sneaky and models TFT.
fn hyper_q() -> Verdict {
    let t = Instant::now();
    let setup = LearnerSetup::default();
    assert_eq!(setup.learner.backend, BackendKind::Neural);
    let scores: Vec<f64> =
        SEEDS.iter().map(|&s| tournament_score(AgentSpec::Learner(LearnerKind::HyperQ), StrategyKind::Sneaky, &setup, 3_000, s).0).collect();
    let score_ok: Vec<bool> = scores.iter().map(|&x| within(x, 400.0, 8.0)).collect();
    let acc: Vec<f64> = SEEDS.iter().map(|&s| opponent_model_accuracy(3_000, s)).collect();
    let acc_ok: Vec<bool> = acc.iter().map(|&a| a >= 0.95).collect();
    let secs = t.elapsed().as_secs_f64() / SEEDS.len() as f64;
    let shown: Vec<String> = scores.iter().map(|x| format!("{x:.0}")).collect();
    let shown_acc: Vec<String> = acc.iter().map(|x| format!("{x:.3}")).collect();
    verdict(
        count(&score_ok) >= QUORUM && count(&acc_ok) >= QUORUM && secs < 1_200.0,
        format!(
            "vs sneaky [{}] {}; tft model accuracy [{}] {}; {secs:.0}s/seed",
            shown.join(" "),
            marks(&score_ok),
            shown_acc.join(" "),
            marks(&acc_ok)
        ),
    )
}

// 5. Both baselines end in mutual defection; Hyper-Q gets there first.
fn baselines_defect() -> Verdict {
    let t = Instant::now();
    // Both pairs abandon cooperation within the first hundred episodes, so
    // the crossing needs a fine evaluation grid to be resolved.
    let cfg = HeadToHeadConfig { eval_every: 5, ..HeadToHeadConfig::default() };
    let setup = LearnerSetup::default();
    let mut defect = Vec::new();
    let mut earlier = Vec::new();
    let mut shown = Vec::new();
    for &seed in &SEEDS {
        let q = run_head_to_head([LearnerKind::Q; 2], &cfg, &setup, seed, &mut |_| {}).unwrap();
        let h = run_head_to_head([LearnerKind::HyperQ; 2], &cfg, &setup, seed, &mut |_| {}).unwrap();
        let final_rate = |o: &probe_arena::arena::HeadToHeadOutcome| {
            (0..2).map(|k| o.final_coop_rate(k, 100, cfg.match_steps)).fold(0.0, f64::max)
        };
        let crossing = |o: &probe_arena::arena::HeadToHeadOutcome| {
            (0..2).filter_map(|k| o.settles_below_half(k)).max().filter(|_| (0..2).all(|k| o.settles_below_half(k).is_some()))
        };
        let (fq, fh) = (final_rate(&q), final_rate(&h));
        let (cq, ch) = (crossing(&q), crossing(&h));
        defect.push(fq < 0.05 && fh < 0.05);
        earlier.push(matches!((ch, cq), (Some(a), Some(b)) if a < b));
        let ep = |c: Option<usize>, o: &probe_arena::arena::HeadToHeadOutcome| {
            c.map(|i| o.evals.get(i).map_or(cfg.episodes, |e| e.episode).to_string()).unwrap_or_else(|| "never".into())
        };
        shown.push(format!("q {fq:.2}@{} hq {fh:.2}@{}", ep(cq, &q), ep(ch, &h)));
    }
    let secs = t.elapsed().as_secs_f64() / SEEDS.len() as f64;
    verdict(
        count(&defect) >= QUORUM && count(&earlier) >= QUORUM,
        format!(
            "final coop rate @ settling episode: {}; defect {} hyper-q earlier {}; {secs:.0}s/seed",
            shown.join(", "),
            marks(&defect),
            marks(&earlier)
        ),
    )
}

/// Learner and probe/player settings for the self-play η sweep.
fn eta_sweep_setup(eta: f64) -> (LearnerConfig, LtpConfig) {
    let cfg = ExperimentConfig::new(Mode::EtaSweep, vec![1]);
    let learner = LearnerConfig { learning_rate: 1e-3, gamma: 0.0, ..cfg.learner };
    let ltp = LtpConfig {
        eta,
        cycles: 150,
        rollout_learning_rate: Some(0.1),
        rollout_first_move_epsilon: Some(0.5),
        ..cfg.ltp
    };
    (learner, ltp)
}

/// Final greedy 20-round rewards and cooperation rates of a self-play pair.
fn self_play(eta: f64, seed: u64) -> ([f64; 2], [f64; 2]) {
    let (learner, ltp) = eta_sweep_setup(eta);
    let payoff = PayoffMatrix::default();
    let mut a = LtpAgent::new("ltp_a", &ltp, &learner, payoff, derive_seed(seed, &[0, 1]));
    let mut b = LtpAgent::new("ltp_b", &ltp, &learner, payoff, derive_seed(seed, &[0, 2]));
    let mut last = Vec::new();
    ltp_train(&mut a, LtpOpponent::Ltp(&mut b), &mut |r| {
        if r.cycle == ltp.cycles {
            last.push((r.eval_cum_reward, r.coop_rate));
        }
    })
    .unwrap();
    ([last[0].0, last[1].0], [last[0].1, last[1].1])
}

// 6. Self-play cooperation emerges at high η only.
fn eta_threshold() -> Verdict {
    let t = Instant::now();
    let etas = [0.01, 0.5, 0.7, 0.99];
    let mut by_eta = vec![Vec::new(); etas.len()];
    let mut coop = vec![Vec::new(); SEEDS.len()];
    let mut runs = 0;
    for (s, &seed) in SEEDS.iter().enumerate() {
        for (e, &eta) in etas.iter().enumerate() {
            let (reward, rate) = self_play(eta, seed);
            runs += 1;
            by_eta[e].push(reward);
            coop[s].push((rate[0] + rate[1]) / 2.0);
        }
    }
    let secs = t.elapsed().as_secs_f64() / runs as f64;
    let hit = |e: usize, target: f64, tol: f64| -> Vec<bool> {
        by_eta[e].iter().map(|r| r.iter().all(|&x| within(x, target, tol))).collect()
    };
    let low = hit(0, 20.0, 3.0);
    let mid = hit(1, 20.0, 3.0);
    let high = hit(3, 60.0, 2.0);
    let monotone: Vec<bool> = coop.iter().map(|c| c.windows(2).all(|w| w[1] >= w[0])).collect();
    let show = |e: usize| -> String {
        by_eta[e].iter().map(|r| format!("{:.0}/{:.0}", r[0], r[1])).collect::<Vec<_>>().join(" ")
    };
    verdict(
        [&low, &mid, &high, &monotone].iter().all(|v| count(v) >= QUORUM) && secs < 2_700.0,
        format!(
            "eta 0.01 [{}] {}; 0.5 [{}] {}; 0.7 [{}]; 0.99 [{}] {}; coop non-decreasing {}; {secs:.0}s/run",
            show(0),
            marks(&low),
            show(1),
            marks(&mid),
            show(2),
            show(3),
            marks(&high),
            marks(&monotone)
        ),
    )
}

/// Setup for probe/player agents trained against static opponents.
fn ltp_static_setup() -> LearnerSetup {
    let ltp = LtpConfig { eta: 0.99, cycles: 100, rollout_first_move_epsilon: Some(0.5), ..LtpConfig::default() };
    LearnerSetup { learner: LearnerConfig::tabular(0.1), ltp, ..LearnerSetup::default() }
}

// 7. Probe/player agent against the static opponents.
fn ltp_vs_statics() -> Verdict {
    let setup = ltp_static_setup();
    let mut v = static_opponents(AgentSpec::Ltp, &setup, 1, (360.0, 400.0), 2_700.0);
    let (plain, inverted) = tournament_score(AgentSpec::Ltp, StrategyKind::Prober, &setup, 1, SEEDS[0]);
    v.detail.push_str(&format!("; prober (reported only) {plain:.0}, inverted {inverted:.0}"));
    v
}

// 8. Cooperation between two Q-learners emerges as TFT agents are added.
fn society() -> Verdict {
    let t = Instant::now();
    let setup = LearnerSetup { learner: LearnerConfig::tabular(0.1), ..LearnerSetup::default() };
    let cfg = SocietyConfig { episodes: 5_000, ..SocietyConfig::default() };
    let ks = [0usize, 2, 4, 6];
    let mut rates = vec![Vec::new(); ks.len()];
    for &seed in &SEEDS {
        for (i, &k) in ks.iter().enumerate() {
            let roster = society_roster(LearnerKind::Q, 2, &[(AgentSpec::Static(StrategyKind::TitForTat), k)]).unwrap();
            let out = run_society(&roster, &cfg, &setup, seed, &mut |_| {}).unwrap();
            rates[i].push(out.learner_mutual_coop);
        }
    }
    let secs = t.elapsed().as_secs_f64() / (SEEDS.len() * ks.len()) as f64;
    let none: Vec<bool> = rates[0].iter().map(|&r| r < 0.1).collect();
    let six: Vec<bool> = rates[3].iter().map(|&r| r > 0.9).collect();
    let means: Vec<f64> = rates.iter().map(|r| r.iter().sum::<f64>() / r.len() as f64).collect();
    let monotone = means.windows(2).all(|w| w[1] >= w[0]);
    let shown: Vec<String> = ks.iter().zip(&means).map(|(k, m)| format!("k={k} {m:.2}")).collect();
    verdict(
        count(&none) >= QUORUM && count(&six) >= QUORUM && monotone,
        format!(
            "mean mutual cooperation {}; k=0 below 0.1 {}; k=6 above 0.9 {}; {secs:.0}s/run",
            shown.join(", "),
            marks(&none),
            marks(&six)
        ),
    )
}

fn replay_config(mode: Mode) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(mode, vec![11]);
    cfg.run_id = format!("replay-{}", mode.name());
    cfg.tournament.roster = vec![AgentSpec::Learner(LearnerKind::Q), AgentSpec::Ltp, AgentSpec::Static(StrategyKind::Sneaky)];
    cfg.tournament.episodes = 30;
    cfg.tournament.match_steps = 20;
    cfg.ltp.cycles = 3;
    cfg.ltp.probe_phase_steps = 200;
    cfg.ltp.rollouts_per_cycle = 16;
    cfg.head_to_head.pair = [LearnerKind::Q, LearnerKind::HyperQ];
    cfg.head_to_head.episodes = 60;
    cfg.eta_sweep.etas = vec![0.0, 0.99];
    cfg.society.episodes = 60;
    cfg.society.tft_counts = vec![0, 3];
    cfg.learner.batch_size = 32;
    cfg
}

// 9. Identical config and seed give byte-identical metrics.
fn deterministic_replay() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let mut parts = Vec::new();
    let mut all = true;
    for mode in [Mode::Tournament, Mode::HeadToHead, Mode::EtaSweep, Mode::Society] {
        let cfg = replay_config(mode);
        let read = |sub: &str| -> Vec<u8> {
            let d = dir.path().join(sub).join(mode.name());
            run_seed(&cfg, 11, &d).unwrap();
            std::fs::read(Path::new(&d).join(METRICS)).unwrap()
        };
        let (x, y) = (read("first"), read("second"));
        let same = x == y && !x.is_empty();
        all &= same;
        parts.push(format!("{} {} bytes {}", mode.name(), x.len(), if same { "identical" } else { "DIFFER" }));
    }
    verdict(all, parts.join(", "))
}

/// Plays a fixed move list.
struct Scripted(Vec<Action>, usize);

impl Agent for Scripted {
    fn label(&self) -> String {
        "scripted".into()
    }
    fn begin_match(&mut self) {
        self.1 = 0;
    }
    fn decide(&mut self, _view: &HistoryWindow, _explore: bool) -> Option<Action> {
        let a = self.0[self.1 % self.0.len()];
        self.1 += 1;
        Some(a)
    }
}

fn moves_against(kind: StrategyKind, opp: &[Action]) -> Vec<Action> {
    let mut s = make_strategy(kind, 0);
    let mut o = Scripted(opp.to_vec(), 0);
    let mc = MatchConfig::new(opp.len(), PayoffMatrix::default(), 0).unwrap();
    play_match(&mut s, &mut o, &mc, false).unwrap().outcomes.iter().map(|r| r.action_self).collect()
}

fn run(a: Action, n: usize) -> Vec<Action> {
    vec![a; n]
}

fn cat(parts: &[Vec<Action>]) -> Vec<Action> {
    parts.concat()
}

// 10. Payoff table and hand-traced strategy sequences.
fn exact_oracles() -> Verdict {
    let m = PayoffMatrix::default();
    let table = [(C, C, (3, 3)), (C, D, (0, 5)), (D, C, (5, 0)), (D, D, (1, 1))];
    let payoff_ok = table.iter().all(|&(a, b, r)| m.payoff(a, b) == r);

    let mut traces = Vec::new();
    traces.push(("tft", moves_against(StrategyKind::TitForTat, &[C, D, D, C, D]) == vec![C, C, D, D, C]));
    traces.push(("tft vs all-d", moves_against(StrategyKind::TitForTat, &run(D, 5)) == cat(&[vec![C], run(D, 4)])));
    let punisher_opp = cat(&[vec![D], run(C, 40)]);
    traces.push(("punisher", moves_against(StrategyKind::Punisher, &punisher_opp) == cat(&[vec![C], run(D, 21), run(C, 19)])));
    traces.push(("punisher vs all-c", moves_against(StrategyKind::Punisher, &run(C, 50)) == run(C, 50)));
    let fg_opp = cat(&[vec![D], run(C, 30)]);
    traces.push(("forgetful grudger", moves_against(StrategyKind::ForgetfulGrudger, &fg_opp) == cat(&[vec![C], run(D, 10), run(C, 20)])));
    traces.push(("forgetful grudger vs all-d", moves_against(StrategyKind::ForgetfulGrudger, &run(D, 40)) == cat(&[vec![C], run(D, 39)])));
    traces.push(("sneaky c,c,c", moves_against(StrategyKind::Sneaky, &[C, C, C, C])[3] == D));
    traces.push(("sneaky c,d,c", moves_against(StrategyKind::Sneaky, &[C, D, C, C])[3] == C));
    let alternating: Vec<Action> = (0..100).map(|i| if i % 2 == 0 { C } else { D }).collect();
    traces.push(("sneaky vs alternation", moves_against(StrategyKind::Sneaky, &alternating) == run(C, 100)));

    let mut sneaky = make_strategy(StrategyKind::Sneaky, 0);
    let mut alt = Scripted(alternating, 0);
    let mc = MatchConfig::new(100, m, 0).unwrap();
    let alt_score = play_match(&mut alt, &mut sneaky, &mc, false).unwrap().cumulative_self;

    let failed: Vec<&str> = traces.iter().filter(|t| !t.1).map(|t| t.0).collect();
    verdict(
        payoff_ok && failed.is_empty() && alt_score == 400,
        format!(
            "payoff table {}; {}/{} traces match{}; alternation vs sneaky {alt_score}",
            if payoff_ok { "exact" } else { "WRONG" },
            traces.len() - failed.len(),
            traces.len(),
            if failed.is_empty() { String::new() } else { format!(" (mismatch: {})", failed.join(", ")) }
        ),
    )
}

fn main() {
    let criteria: [(usize, &str, fn() -> Verdict); 10] = [
        (1, "gradient correctness", gradients),
        (2, "eta=0 reduction", eta_zero),
        (3, "Q best response to static opponents", q_vs_statics),
        (4, "Hyper-Q vs Sneaky and TFT model", hyper_q),
        (5, "baseline mutual defection", baselines_defect),
        (6, "LTP eta threshold", eta_threshold),
        (7, "LTP vs static opponents", ltp_vs_statics),
        (8, "society emergence", society),
        (9, "deterministic replay", deterministic_replay),
        (10, "payoff and strategy oracles", exact_oracles),
    ];
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let mut failed = 0;
    for (id, name, check) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let t = Instant::now();
        let v = check();
        failed += usize::from(!v.pass);
        println!(
            "criterion {id:>2} {}: {name} ({:.0}s): {}",
            if v.pass { "PASS" } else { "FAIL" },
            t.elapsed().as_secs_f64(),
            v.detail
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
