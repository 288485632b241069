//! C ABI over the probe-arena engine.
//!
//! Objects cross the boundary as opaque handles: create them with a
//! `*_new`/`*_parse` call and release them with the matching `*_free`.
//! Every fallible call returns a [`PaStatus`]; after a failure,
//! [`pa_last_error`] copies a message describing it. Messages are kept per
//! thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use probe_arena::arena::{evaluate_against, AgentSpec};
use probe_arena::config::{parse_config, ExperimentConfig};
use probe_arena::game::{play_match, Action, MatchConfig, PayoffMatrix};
use probe_arena::learners::{LearnerConfig, LearnerKind, QLearner};
use probe_arena::neural::gradcheck::{check_cross_entropy_gradients, check_q_gradients, GradcheckConfig};
use probe_arena::run::run_experiment;
use probe_arena::strategies::make_strategy_by_name;
use probe_arena::RunError;

/// Result of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PaStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// An argument was out of range or named an unknown kind.
    InvalidArgument = 3,
    /// A configuration failed to parse or validate.
    Validation = 4,
    /// An experiment or learner failed while running.
    Runtime = 5,
    /// A numerical self-check did not pass.
    CheckFailed = 6,
    /// The engine panicked; the handle involved should be freed.
    Panic = 7,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PaLearnerKind {
    Q = 0,
    HyperQ = 1,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PaBackend {
    Tabular = 0,
    Neural = 1,
}

/// A parsed and validated experiment configuration.
pub struct PaConfig(ExperimentConfig);

/// A Q or Hyper-Q learner.
pub struct PaLearner(QLearner);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

type Failure = (PaStatus, String);

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> PaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PaStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            PaStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    (PaStatus::NullPointer, format!("`{what}` is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (PaStatus::InvalidUtf8, format!("`{what}` is not UTF-8")))
}

unsafe fn mut_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

fn runtime(e: impl std::fmt::Display) -> Failure {
    (PaStatus::Runtime, e.to_string())
}

/// Copies the calling thread's last error message, NUL-terminated and
/// truncated to `len` bytes, into `buf`. Returns the buffer size the full
/// message needs, or 0 if there is no message. `buf` may be null to query
/// the size.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes of writes.
#[no_mangle]
pub unsafe extern "C" fn pa_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| match &*e.borrow() {
        None => 0,
        Some(msg) => {
            let bytes = msg.as_bytes_with_nul();
            if !buf.is_null() && len > 0 {
                let n = bytes.len().min(len);
                std::ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
                *buf.add(n - 1) = 0;
            }
            bytes.len()
        }
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn pa_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Stage payoffs of the default matrix. Actions: 0 = cooperate, 1 = defect.
///
/// # Safety
/// `out_self` and `out_opp` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pa_payoff(a_self: u32, a_opp: u32, out_self: *mut i32, out_opp: *mut i32) -> PaStatus {
    guard(|| {
        let action = |a: u32| {
            Action::from_index(a as usize).ok_or((PaStatus::InvalidArgument, format!("action {a} is not 0 or 1")))
        };
        let (x, y) = PayoffMatrix::default().payoff(action(a_self)?, action(a_opp)?);
        *mut_arg(out_self, "out_self")? = x;
        *mut_arg(out_opp, "out_opp")? = y;
        Ok(())
    })
}

/// Parses and validates a TOML experiment configuration.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pa_config_parse(text: *const c_char, out: *mut *mut PaConfig) -> PaStatus {
    guard(|| {
        let out = mut_arg(out, "out")?;
        let text = str_arg(text, "text")?;
        let cfg = parse_config(text).map_err(|e| (PaStatus::Validation, e.to_string()))?;
        *out = Box::into_raw(Box::new(PaConfig(cfg)));
        Ok(())
    })
}

/// Number of seeds in the configuration, or 0 for a null handle.
///
/// # Safety
/// `cfg` must be null or a live handle from [`pa_config_parse`].
#[no_mangle]
pub unsafe extern "C" fn pa_config_seed_count(cfg: *const PaConfig) -> usize {
    cfg.as_ref().map_or(0, |c| c.0.seeds.len())
}

/// # Safety
/// `cfg` must be null or a handle from [`pa_config_parse`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pa_config_free(cfg: *mut PaConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Runs every seed of the configuration, writing artifacts under `out_dir`.
///
/// # Safety
/// `cfg` must be a live handle; `out_dir` a NUL-terminated path.
#[no_mangle]
pub unsafe extern "C" fn pa_run(cfg: *const PaConfig, out_dir: *const c_char, parallel: u32) -> PaStatus {
    guard(|| {
        let cfg = cfg.as_ref().ok_or_else(|| null("cfg"))?;
        let dir = str_arg(out_dir, "out_dir")?;
        run_experiment(&cfg.0, Path::new(dir), parallel as usize).map_err(|e| match e {
            RunError::Config(e) => (PaStatus::Validation, e.to_string()),
            e => runtime(e),
        })?;
        Ok(())
    })
}

/// Creates a learner with default hyperparameters. The tabular backend uses
/// learning rate 0.1 and is only available to plain Q. `planned_steps` sizes the exploration schedule.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pa_learner_new(
    kind: PaLearnerKind,
    backend: PaBackend,
    planned_steps: u64,
    seed: u64,
    out: *mut *mut PaLearner,
) -> PaStatus {
    guard(|| {
        let out = mut_arg(out, "out")?;
        let cfg = match backend {
            PaBackend::Tabular => LearnerConfig::tabular(0.1),
            PaBackend::Neural => LearnerConfig::default(),
        };
        let (k, id) = match kind {
            PaLearnerKind::Q => (LearnerKind::Q, "q"),
            PaLearnerKind::HyperQ => (LearnerKind::HyperQ, "hyper_q"),
        };
        if k == LearnerKind::HyperQ && matches!(backend, PaBackend::Tabular) {
            return Err((PaStatus::InvalidArgument, "hyper_q needs the neural backend".to_string()));
        }
        *out = Box::into_raw(Box::new(PaLearner(QLearner::new(id, k, &cfg, planned_steps, seed))));
        Ok(())
    })
}

/// Trains the learner for `matches` matches of `steps` rounds against a
/// static strategy named as in configuration files (`tft`, `sneaky`, ...).
///
/// # Safety
/// `learner` must be a live handle; `strategy` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn pa_learner_train(
    learner: *mut PaLearner,
    strategy: *const c_char,
    matches: u32,
    steps: u32,
    seed: u64,
) -> PaStatus {
    guard(|| {
        let l = mut_arg(learner, "learner")?;
        let name = str_arg(strategy, "strategy")?;
        let mut opp = make_strategy_by_name(name, seed).map_err(|e| (PaStatus::InvalidArgument, e.to_string()))?;
        let cfg = MatchConfig::new(steps as usize, PayoffMatrix::default(), seed)
            .map_err(|e| (PaStatus::InvalidArgument, e.to_string()))?;
        for _ in 0..matches {
            let r = play_match(&mut l.0, &mut opp, &cfg, true);
            if let Some(e) = l.0.fault() {
                return Err(runtime(e));
            }
            r.map_err(runtime)?;
        }
        Ok(())
    })
}

/// Writes `Q(state, cooperate)` and `Q(state, defect)` to `out[0..2]`.
///
/// # Safety
/// `learner` must be a live handle; `out` valid for two writes.
#[no_mangle]
pub unsafe extern "C" fn pa_learner_q_values(learner: *const PaLearner, state: u8, out: *mut f64) -> PaStatus {
    guard(|| {
        let l = learner.as_ref().ok_or_else(|| null("learner"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let q = l.0.q_values(state).map_err(runtime)?;
        std::ptr::copy_nonoverlapping(q.as_ptr(), out, 2);
        Ok(())
    })
}

/// Mean greedy score over `matches` matches of `steps` rounds against a
/// static strategy. The learner does not learn during evaluation.
///
/// # Safety
/// `learner` must be a live handle; `strategy` a NUL-terminated string;
/// `out_score` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pa_learner_evaluate(
    learner: *mut PaLearner,
    strategy: *const c_char,
    steps: u32,
    matches: u32,
    seed: u64,
    out_score: *mut f64,
) -> PaStatus {
    guard(|| {
        let l = mut_arg(learner, "learner")?;
        let name = str_arg(strategy, "strategy")?;
        let out = mut_arg(out_score, "out_score")?;
        let spec: AgentSpec = name.parse().map_err(|e: probe_arena::ArenaError| (PaStatus::InvalidArgument, e.to_string()))?;
        if !spec.is_static() {
            return Err((PaStatus::InvalidArgument, format!("`{name}` is not a static strategy")));
        }
        let mut agent = probe_arena::arena::ArenaAgent::Learner(Box::new(l.0.clone()));
        *out = evaluate_against(&mut agent, spec, steps as usize, matches as usize, PayoffMatrix::default(), seed)
            .map_err(runtime)?;
        Ok(())
    })
}

/// # Safety
/// `learner` must be null or a handle from [`pa_learner_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pa_learner_free(learner: *mut PaLearner) {
    if !learner.is_null() {
        drop(Box::from_raw(learner));
    }
}

/// Finite-difference check of the network gradients over `probes` random
/// probes. Writes the largest relative error seen.
///
/// # Safety
/// `out_max_rel_error` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pa_gradcheck(probes: u32, out_max_rel_error: *mut f64) -> PaStatus {
    guard(|| {
        let cfg = GradcheckConfig {
            probes: probes as usize,
            ..GradcheckConfig::default()
        };
        let q = check_q_gradients(&cfg);
        let ce = check_cross_entropy_gradients(&cfg);
        if let Some(out) = out_max_rel_error.as_mut() {
            *out = q.max_rel_error.max(ce.max_rel_error);
        }
        if q.passed() && ce.passed() {
            Ok(())
        } else {
            Err((PaStatus::CheckFailed, format!("{} gradient components disagree", q.failures + ce.failures)))
        }
    })
}
