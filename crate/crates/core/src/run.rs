//! Seeded experiment execution and on-disk artifacts.
//!
//! Each seed writes into its own directory `<out>/<run_id>/seed-<seed>/`:
//! `metrics.csv`, `config.resolved`, mode-specific tables and
//! `checkpoints/`. An `INCOMPLETE` file marks a directory whose run has not
//! finished.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::arena::{
    run_head_to_head, run_society, run_tournament, CurveRow, LearnerSetup, SCORE_HEADERS,
};
use crate::config::{ExperimentConfig, Mode};
use crate::error::{ArenaError, RunError};
use crate::ltp::{ltp_to_bytes, ltp_train, CycleRecord, LtpAgent, LtpOpponent};

pub const SENTINEL: &str = "INCOMPLETE";
pub const RESOLVED: &str = "config.resolved";
pub const METRICS: &str = "metrics.csv";

/// `metrics.csv` header for a mode.
pub fn metrics_header(mode: Mode) -> &'static [&'static str] {
    match mode {
        Mode::Tournament | Mode::HeadToHead => {
            &["run_id", "seed", "episode", "agent_id", "cum_reward", "coop_rate", "epsilon"]
        }
        Mode::Society => &["run_id", "seed", "tft", "episode", "agent_id", "cum_reward", "coop_rate", "epsilon"],
        Mode::EtaSweep => &[
            "run_id",
            "seed",
            "cycle",
            "agent_id",
            "eta",
            "eval_cum_reward",
            "coop_rate",
            "adjusted_reward_mean",
        ],
    }
}

fn setup(cfg: &ExperimentConfig) -> LearnerSetup {
    LearnerSetup {
        learner: cfg.learner.clone(),
        ltp: cfg.ltp.clone(),
        payoff: cfg.payoff,
    }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>, RunError> {
    let f = fs::File::create(path).map_err(|e| RunError::io(path, e))?;
    Ok(csv::Writer::from_writer(f))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), RunError> {
    fs::write(path, bytes).map_err(|e| RunError::io(path, e))
}

fn curve_record(prefix: &[String], r: &CurveRow) -> Vec<String> {
    let mut v = prefix.to_vec();
    v.extend([
        r.episode.to_string(),
        r.agent_id.clone(),
        r.cum_reward.to_string(),
        r.coop_rate.to_string(),
        r.epsilon.to_string(),
    ]);
    v
}

fn cycle_record(prefix: &[String], r: &CycleRecord) -> Vec<String> {
    let mut v = prefix.to_vec();
    v.extend([
        r.cycle.to_string(),
        r.agent_id.clone(),
        r.eta.to_string(),
        r.eval_cum_reward.to_string(),
        r.coop_rate.to_string(),
        r.adjusted_reward_mean.to_string(),
    ]);
    v
}

fn write_checkpoints(dir: &Path, cps: &[(String, Vec<u8>)]) -> Result<(), RunError> {
    let cp_dir = dir.join("checkpoints");
    fs::create_dir_all(&cp_dir).map_err(|e| RunError::io(&cp_dir, e))?;
    for (name, bytes) in cps {
        let file = name.replace(['@', '/', '\\'], "_");
        write_file(&cp_dir.join(format!("{file}.bin")), bytes)?;
    }
    Ok(())
}

/// Directory that holds the artifacts of one seed.
pub fn seed_dir(out_root: &Path, cfg: &ExperimentConfig, seed: u64) -> PathBuf {
    out_root.join(&cfg.run_id).join(format!("seed-{seed}"))
}

/// Runs one seed of `cfg` into `dir`.
pub fn run_seed(cfg: &ExperimentConfig, seed: u64, dir: &Path) -> Result<(), RunError> {
    fs::create_dir_all(dir).map_err(|e| RunError::io(dir, e))?;
    let sentinel = dir.join(SENTINEL);
    write_file(&sentinel, b"run in progress or aborted\n")?;
    let mut resolved = cfg.clone();
    resolved.seeds = vec![seed];
    resolved.out = None;
    write_file(&dir.join(RESOLVED), resolved.to_toml().as_bytes())?;

    let mut metrics = csv_writer(&dir.join(METRICS))?;
    metrics.write_record(metrics_header(cfg.mode))?;
    let prefix = vec![cfg.run_id.clone(), seed.to_string()];
    let setup = setup(cfg);
    // Sinks cannot return errors; the first failure is kept and reported.
    let mut sink_err: Option<csv::Error> = None;

    match cfg.mode {
        Mode::Tournament => {
            let roster = cfg.tournament_roster()?;
            let out = run_tournament(&roster, &cfg.tournament.arena(), &setup, seed, &mut |r| {
                if let Err(e) = metrics.write_record(curve_record(&prefix, r)) {
                    sink_err.get_or_insert(e);
                }
            })?;
            let mut scores = csv_writer(&dir.join("scores.csv"))?;
            let mut header = vec!["agent"];
            header.extend(SCORE_HEADERS);
            scores.write_record(&header)?;
            let mut variants = csv_writer(&dir.join("prober_variants.csv"))?;
            variants.write_record(["agent", "prober", "prober_inverted"])?;
            for row in &out.scores {
                let mut rec = vec![row.agent.clone()];
                rec.extend(row.scores.iter().map(f64::to_string));
                scores.write_record(&rec)?;
                variants.write_record([row.agent.clone(), row.scores[2].to_string(), row.prober_inverted.to_string()])?;
            }
            scores.flush().map_err(|e| RunError::io(dir, e))?;
            variants.flush().map_err(|e| RunError::io(dir, e))?;
            if !out.ltp_cycles.is_empty() {
                let mut w = csv_writer(&dir.join("ltp_cycles.csv"))?;
                w.write_record(&metrics_header(Mode::EtaSweep)[2..])?;
                for r in &out.ltp_cycles {
                    w.write_record(&cycle_record(&[], r))?;
                }
                w.flush().map_err(|e| RunError::io(dir, e))?;
            }
            write_checkpoints(dir, &out.checkpoints)?;
        }
        Mode::HeadToHead => {
            let h = &cfg.head_to_head;
            let out = run_head_to_head(h.pair, &h.arena(), &setup, seed, &mut |r| {
                if let Err(e) = metrics.write_record(curve_record(&prefix, r)) {
                    sink_err.get_or_insert(e);
                }
            })?;
            let mut w = csv_writer(&dir.join("evals.csv"))?;
            w.write_record(["episode", "agent_id", "eval_cum_reward", "coop_rate"])?;
            let ids = [format!("{}_a", h.pair[0].name()), format!("{}_b", h.pair[1].name())];
            for e in &out.evals {
                for k in 0..2 {
                    w.write_record([e.episode.to_string(), ids[k].clone(), e.reward[k].to_string(), e.coop_rate[k].to_string()])?;
                }
            }
            w.flush().map_err(|e| RunError::io(dir, e))?;
            write_checkpoints(dir, &out.checkpoints)?;
        }
        Mode::EtaSweep => {
            let mut cps = Vec::new();
            for (k, &eta) in cfg.eta_sweep.etas.iter().enumerate() {
                let mut ltp = cfg.ltp.clone();
                ltp.eta = eta;
                let mk = |tag: &str, n: u64| {
                    let s = crate::rng::derive_seed(seed, &[k as u64, n]);
                    LtpAgent::new(format!("ltp_{tag}"), &ltp, &cfg.learner, cfg.payoff, s)
                };
                let (mut a, mut b) = (mk("a", 1), mk("b", 2));
                ltp_train(&mut a, LtpOpponent::Ltp(&mut b), &mut |r| {
                    if let Err(e) = metrics.write_record(cycle_record(&prefix, r)) {
                        sink_err.get_or_insert(e);
                    }
                })?;
                cps.push((format!("ltp_a_eta{eta}"), ltp_to_bytes(&a)));
                cps.push((format!("ltp_b_eta{eta}"), ltp_to_bytes(&b)));
            }
            write_checkpoints(dir, &cps)?;
        }
        Mode::Society => {
            let s = &cfg.society;
            let mut summary = csv_writer(&dir.join("society.csv"))?;
            summary.write_record(["tft", "learner_mutual_coop", "reward_a", "reward_b"])?;
            let mut snaps = csv_writer(&dir.join("q_snapshots.csv"))?;
            snaps.write_record(["tft", "episode", "agent_id", "all_c_c", "all_c_d", "all_d_c", "all_d_d"])?;
            let mut cps = Vec::new();
            for &tft in &s.tft_counts {
                let roster = s.roster(tft)?;
                let mut pre = prefix.clone();
                pre.push(tft.to_string());
                let run_seed = crate::rng::derive_seed(seed, &[tft as u64]);
                let out = run_society(&roster, &s.arena(), &setup, run_seed, &mut |r| {
                    if let Err(e) = metrics.write_record(curve_record(&pre, r)) {
                        sink_err.get_or_insert(e);
                    }
                })?;
                summary.write_record([
                    tft.to_string(),
                    out.learner_mutual_coop.to_string(),
                    out.learner_rewards[0].to_string(),
                    out.learner_rewards[1].to_string(),
                ])?;
                for q in &out.snapshots {
                    snaps.write_record([
                        tft.to_string(),
                        q.episode.to_string(),
                        q.agent_id.clone(),
                        q.all_c[0].to_string(),
                        q.all_c[1].to_string(),
                        q.all_d[0].to_string(),
                        q.all_d[1].to_string(),
                    ])?;
                }
                cps.extend(out.checkpoints.into_iter().map(|(id, b)| (format!("tft{tft}_{id}"), b)));
            }
            summary.flush().map_err(|e| RunError::io(dir, e))?;
            snaps.flush().map_err(|e| RunError::io(dir, e))?;
            write_checkpoints(dir, &cps)?;
        }
    }
    if let Some(e) = sink_err {
        return Err(e.into());
    }
    metrics.flush().map_err(|e| RunError::io(dir, e))?;
    fs::remove_file(&sentinel).map_err(|e| RunError::io(&sentinel, e))?;
    Ok(())
}

/// Runs every seed of `cfg`, `parallel` seeds at a time. Returns the seed
/// directories in seed-list order.
pub fn run_experiment(cfg: &ExperimentConfig, out_root: &Path, parallel: usize) -> Result<Vec<PathBuf>, RunError> {
    cfg.validate()?;
    let dirs: Vec<PathBuf> = cfg.seeds.iter().map(|&s| seed_dir(out_root, cfg, s)).collect();
    let jobs: Vec<(u64, &PathBuf)> = cfg.seeds.iter().copied().zip(&dirs).collect();
    for chunk in jobs.chunks(parallel.max(1)) {
        let results: Vec<Result<(), RunError>> = std::thread::scope(|scope| {
            let handles: Vec<_> = chunk
                .iter()
                .map(|&(seed, dir)| scope.spawn(move || run_seed(cfg, seed, dir)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().unwrap_or_else(|_| Err(RunError::Arena(ArenaError::UnknownKind("worker panicked".into())))))
                .collect()
        });
        for r in results {
            r?;
        }
    }
    Ok(dirs)
}

/// Mean and sample standard deviation of final-window reward across seeds for
/// one configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub run_id: String,
    /// `eta=<v>` or `tft=<k>` where the mode sweeps one, else empty.
    pub group: String,
    pub agent_id: String,
    pub seeds: usize,
    pub mean: f64,
    pub std: f64,
    pub note: String,
}

fn find_metrics(root: &Path, out: &mut Vec<PathBuf>) -> Result<(), RunError> {
    if root.is_file() {
        out.push(root.to_path_buf());
        return Ok(());
    }
    let mut entries: Vec<PathBuf> = fs::read_dir(root)
        .map_err(|e| RunError::io(root, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| RunError::io(root, err)))
        .collect::<Result<_, _>>()?;
    entries.sort();
    for p in entries {
        if p.is_dir() {
            find_metrics(&p, out)?;
        } else if p.file_name().is_some_and(|n| n == METRICS) {
            out.push(p);
        }
    }
    Ok(())
}

fn column(header: &csv::StringRecord, names: &[&str]) -> Option<usize> {
    header.iter().position(|h| names.contains(&h))
}

/// Aggregates `metrics.csv` files found under `paths`. Each seed contributes
/// the mean reward over its last `window` episodes or cycles.
pub fn summarize(paths: &[PathBuf], window: usize) -> Result<Vec<SummaryRow>, RunError> {
    use std::collections::BTreeMap;
    let mut files = Vec::new();
    for p in paths {
        find_metrics(p, &mut files)?;
    }
    if files.is_empty() {
        return Err(RunError::SchemaMismatch("no metrics.csv found".into()));
    }
    let mut header: Option<csv::StringRecord> = None;
    // (run_id, group, agent) -> seed -> (step, reward) rows
    type Series = BTreeMap<String, Vec<(u64, f64)>>;
    let mut data: BTreeMap<(String, String, String), Series> = BTreeMap::new();
    for f in &files {
        let mut rdr = csv::Reader::from_path(f)?;
        let h = rdr.headers()?.clone();
        match &header {
            None => header = Some(h.clone()),
            Some(first) if *first != h => {
                return Err(RunError::SchemaMismatch(format!(
                    "{} has columns `{}`, expected `{}`",
                    f.display(),
                    h.iter().collect::<Vec<_>>().join(","),
                    first.iter().collect::<Vec<_>>().join(",")
                )))
            }
            Some(_) => {}
        }
        let need = |names: &[&str]| {
            column(&h, names).ok_or_else(|| RunError::SchemaMismatch(format!("{} lacks a `{}` column", f.display(), names[0])))
        };
        let run = need(&["run_id"])?;
        let seed = need(&["seed"])?;
        let step = need(&["episode", "cycle"])?;
        let agent = need(&["agent_id"])?;
        let reward = need(&["cum_reward", "eval_cum_reward"])?;
        let group = column(&h, &["eta", "tft"]).map(|i| (i, h[i].to_string()));
        for rec in rdr.records() {
            let rec = rec?;
            let parse = |i: usize| -> Result<f64, RunError> {
                rec[i]
                    .parse::<f64>()
                    .map_err(|_| RunError::SchemaMismatch(format!("{}: `{}` is not a number", f.display(), &rec[i])))
            };
            let g = group.as_ref().map(|(i, name)| format!("{name}={}", &rec[*i])).unwrap_or_default();
            let key = (rec[run].to_string(), g, rec[agent].to_string());
            data.entry(key)
                .or_default()
                .entry(rec[seed].to_string())
                .or_default()
                .push((parse(step)? as u64, parse(reward)?));
        }
    }
    let window = window.max(1);
    let rows = data
        .into_iter()
        .map(|((run_id, group, agent_id), seeds)| {
            let finals: Vec<f64> = seeds
                .values()
                .map(|rows| {
                    let mut rows = rows.clone();
                    rows.sort_by_key(|r| r.0);
                    let tail = &rows[rows.len().saturating_sub(window)..];
                    tail.iter().map(|r| r.1).sum::<f64>() / tail.len() as f64
                })
                .collect();
            let (mean, std) = mean_std(&finals);
            SummaryRow {
                run_id,
                group,
                agent_id,
                seeds: finals.len(),
                mean,
                std,
                note: if finals.len() == 1 { "single seed: std not estimable".into() } else { String::new() },
            }
        })
        .collect();
    Ok(rows)
}

/// Mean and sample (n - 1) standard deviation; the deviation of a single value is 0.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Writes summary rows as CSV.
pub fn write_summary<W: Write>(rows: &[SummaryRow], w: W) -> Result<(), RunError> {
    let mut w = csv::Writer::from_writer(w);
    w.write_record(["run_id", "group", "agent_id", "seeds", "mean", "std", "note"])?;
    for r in rows {
        w.write_record([
            r.run_id.clone(),
            r.group.clone(),
            r.agent_id.clone(),
            r.seeds.to_string(),
            r.mean.to_string(),
            r.std.to_string(),
            r.note.clone(),
        ])?;
    }
    w.flush().map_err(|e| RunError::io("<summary>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_std_arithmetic() {
        assert_eq!(mean_std(&[60.0; 5]), (60.0, 0.0));
        assert_eq!(mean_std(&[7.0]), (7.0, 0.0));
        let (m, s) = mean_std(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]);
        assert_eq!(m, 5.0);
        assert!((s - (32.0f64 / 7.0).sqrt()).abs() < 1e-12);
    }
}
