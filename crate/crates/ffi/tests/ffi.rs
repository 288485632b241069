use std::ffi::{c_char, CStr, CString};
use std::ptr;

use probe_arena_ffi::*;

fn last_error() -> String {
    let n = unsafe { pa_last_error(ptr::null_mut(), 0) };
    let mut buf = vec![0 as c_char; n];
    unsafe { pa_last_error(buf.as_mut_ptr(), n) };
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

#[test]
fn payoffs() {
    let (mut a, mut b) = (0, 0);
    let cases = [(0, 0, 3, 3), (0, 1, 0, 5), (1, 0, 5, 0), (1, 1, 1, 1)];
    for (x, y, ex, ey) in cases {
        assert_eq!(unsafe { pa_payoff(x, y, &mut a, &mut b) }, PaStatus::Ok);
        assert_eq!((a, b), (ex, ey));
    }
    assert_eq!(unsafe { pa_payoff(2, 0, &mut a, &mut b) }, PaStatus::InvalidArgument);
    assert!(last_error().contains("action 2"));
    assert_eq!(unsafe { pa_payoff(0, 0, ptr::null_mut(), &mut b) }, PaStatus::NullPointer);
}

#[test]
fn config_errors_carry_field_paths() {
    let text = CString::new("mode = \"eta_sweep\"\nseeds = [1]\n[ltp]\neta = 1.5\n").unwrap();
    let mut cfg: *mut PaConfig = ptr::null_mut();
    assert_eq!(unsafe { pa_config_parse(text.as_ptr(), &mut cfg) }, PaStatus::Validation);
    assert!(cfg.is_null());
    assert!(last_error().contains("ltp.eta"));

    let text = CString::new("mode = \"head_to_head\"\nseeds = [1, 2, 3]\n").unwrap();
    assert_eq!(unsafe { pa_config_parse(text.as_ptr(), &mut cfg) }, PaStatus::Ok);
    assert_eq!(unsafe { pa_config_seed_count(cfg) }, 3);
    unsafe { pa_config_free(cfg) };
    unsafe { pa_config_free(ptr::null_mut()) };
    assert_eq!(unsafe { pa_config_seed_count(ptr::null()) }, 0);
    assert_eq!(unsafe { pa_config_parse(ptr::null(), &mut cfg) }, PaStatus::NullPointer);
}

#[test]
fn run_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let text = CString::new(
        "mode = \"head_to_head\"\nrun_id = \"h\"\nseeds = [4]\n\
         [learner]\nbackend = \"tabular\"\nlearning_rate = 0.1\ntarget_sync = 1\nbatch_size = 16\n\
         [head_to_head]\nepisodes = 5\neval_every = 5\n",
    )
    .unwrap();
    let mut cfg: *mut PaConfig = ptr::null_mut();
    assert_eq!(unsafe { pa_config_parse(text.as_ptr(), &mut cfg) }, PaStatus::Ok);
    let out = CString::new(dir.path().to_str().unwrap()).unwrap();
    assert_eq!(unsafe { pa_run(cfg, out.as_ptr(), 1) }, PaStatus::Ok);
    let seed_dir = dir.path().join("h").join("seed-4");
    assert!(seed_dir.join("metrics.csv").is_file());
    assert!(!seed_dir.join("INCOMPLETE").exists());
    unsafe { pa_config_free(cfg) };
}

#[test]
fn learner_lifecycle() {
    let mut l: *mut PaLearner = ptr::null_mut();
    assert_eq!(
        unsafe { pa_learner_new(PaLearnerKind::Q, PaBackend::Tabular, 100_000, 7, &mut l) },
        PaStatus::Ok
    );
    let mut hq: *mut PaLearner = ptr::null_mut();
    assert_eq!(
        unsafe { pa_learner_new(PaLearnerKind::HyperQ, PaBackend::Tabular, 100, 7, &mut hq) },
        PaStatus::InvalidArgument
    );
    assert!(hq.is_null());
    let tft = CString::new("tft").unwrap();
    assert_eq!(unsafe { pa_learner_train(l, tft.as_ptr(), 500, 100, 1) }, PaStatus::Ok);
    let mut score = 0.0;
    assert_eq!(unsafe { pa_learner_evaluate(l, tft.as_ptr(), 100, 3, 2, &mut score) }, PaStatus::Ok);
    assert_eq!(score, 300.0);
    let mut q = [0.0; 2];
    assert_eq!(unsafe { pa_learner_q_values(l, 0, q.as_mut_ptr()) }, PaStatus::Ok);
    assert!(q[0] > q[1], "{q:?}");

    let bogus = CString::new("grim").unwrap();
    assert_eq!(unsafe { pa_learner_train(l, bogus.as_ptr(), 1, 10, 1) }, PaStatus::InvalidArgument);
    assert!(last_error().contains("grim"));
    let q_kind = CString::new("q").unwrap();
    assert_eq!(
        unsafe { pa_learner_evaluate(l, q_kind.as_ptr(), 10, 1, 1, &mut score) },
        PaStatus::InvalidArgument
    );
    assert_eq!(unsafe { pa_learner_q_values(l, 0, ptr::null_mut()) }, PaStatus::NullPointer);
    unsafe { pa_learner_free(l) };
}

#[test]
fn gradcheck_passes() {
    let mut err = f64::NAN;
    assert_eq!(unsafe { pa_gradcheck(4, &mut err) }, PaStatus::Ok);
    assert!(err < 1e-4);
}

#[test]
fn version_and_header() {
    let v = unsafe { CStr::from_ptr(pa_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/probe_arena.h")).unwrap();
    for name in [
        "pa_last_error",
        "pa_config_parse",
        "pa_run",
        "pa_learner_new",
        "pa_learner_evaluate",
        "typedef struct PaLearner PaLearner",
        "PaStatus_Panic = 7",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }
}
