use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use probe_arena::config::{parse_config, ExperimentConfig};
use probe_arena::neural::gradcheck::{check_cross_entropy_gradients, check_q_gradients, GradcheckConfig};
use probe_arena::run::{run_experiment, summarize, write_summary};
use probe_arena::{ConfigError, RunError};

const EXIT_VALIDATION: u8 = 1;
const EXIT_RUNTIME: u8 = 2;
const EXIT_CHECK: u8 = 3;

#[derive(Parser)]
#[command(name = "probe-arena", version, about = "Iterated prisoner's dilemma experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a TOML config.
    Run {
        config: PathBuf,
        /// Replace the config's seed list with this single seed.
        #[arg(long)]
        seed_override: Option<u64>,
        /// Output root; defaults to the config's `out`, then PROBE_ARENA_OUT, then `runs`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Seeds run concurrently.
        #[arg(long, default_value_t = 1)]
        parallel: usize,
    },
    /// Mean and standard deviation of final-window reward across seeds.
    Summarize {
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
        /// Trailing episodes or cycles averaged per seed.
        #[arg(long, default_value_t = 10)]
        window: usize,
    },
    /// Parse and validate a config, printing the resolved document.
    Validate { config: PathBuf },
    /// Finite-difference check of the network gradients.
    Gradcheck {
        #[arg(long, default_value_t = 100)]
        probes: usize,
    },
}

fn load(path: &PathBuf) -> Result<ExperimentConfig, ExitCode> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        eprintln!("error: cannot read {}: {e}", path.display());
        ExitCode::from(EXIT_VALIDATION)
    })?;
    parse_config(&text).map_err(|e: ConfigError| {
        eprintln!("error: {}: {e}", path.display());
        ExitCode::from(EXIT_VALIDATION)
    })
}

fn runtime(e: RunError) -> ExitCode {
    eprintln!("error: {e}");
    match e {
        RunError::Config(_) => ExitCode::from(EXIT_VALIDATION),
        _ => ExitCode::from(EXIT_RUNTIME),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, seed_override, out, parallel } => {
            let mut cfg = match load(&config) {
                Ok(c) => c,
                Err(code) => return code,
            };
            if let Some(s) = seed_override {
                cfg.seeds = vec![s];
            }
            let root = out
                .or_else(|| cfg.out.clone())
                .or_else(|| std::env::var_os("PROBE_ARENA_OUT").map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from("runs"));
            match run_experiment(&cfg, &root, parallel) {
                Ok(dirs) => {
                    for d in dirs {
                        println!("{}", d.display());
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => runtime(e),
            }
        }
        Command::Summarize { dirs, window } => match summarize(&dirs, window) {
            Ok(rows) => match write_summary(&rows, std::io::stdout().lock()) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => runtime(e),
            },
            Err(e) => runtime(e),
        },
        Command::Validate { config } => match load(&config) {
            Ok(cfg) => {
                print!("{}", cfg.to_toml());
                ExitCode::SUCCESS
            }
            Err(code) => code,
        },
        Command::Gradcheck { probes } => {
            let cfg = GradcheckConfig { probes, ..GradcheckConfig::default() };
            let q = check_q_gradients(&cfg);
            let ce = check_cross_entropy_gradients(&cfg);
            for (name, r) in [("td", &q), ("cross_entropy", &ce)] {
                println!(
                    "{name}: probes={} checked={} skipped={} max_rel_error={:.3e} failures={}",
                    r.probes, r.components_checked, r.components_skipped, r.max_rel_error, r.failures
                );
            }
            if q.passed() && ce.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_CHECK)
            }
        }
    }
}
