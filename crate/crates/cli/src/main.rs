//! `spinlens`: runs one named scenario from a TOML config.
//!
//! Exit status: 0 success, 1 I/O failure, 2 invalid spec (nothing written),
//! 3 numerical failure mid-run (partial outputs, manifest marked failed).

mod config;
mod manifest;
mod scenarios;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use log::{error, info, warn};

use crate::config::{parse, validate};
use crate::manifest::RunDir;

const EXIT_IO: u8 = 1;
const EXIT_INVALID_SPEC: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "spinlens",
    version,
    about = "Run a spin-lens scenario from a TOML config"
)]
struct Args {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output_dir` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed; overrides `master_seed` in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; falls back to SPINLENS_THREADS, then all cores.
    #[arg(long, env = "SPINLENS_THREADS")]
    threads: Option<usize>,
    /// Print the schema and physics report and exit.
    #[arg(long)]
    validate_only: bool,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = Args::parse();
    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            error!("cannot read {}: {e}", args.config.display());
            return ExitCode::from(EXIT_IO);
        }
    };
    let mut cfg = match parse(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("invalid-spec: {}: {e}", args.config.display());
            return ExitCode::from(EXIT_INVALID_SPEC);
        }
    };
    if let Some(seed) = args.seed {
        cfg.master_seed = seed;
    }
    let report = validate(&cfg);
    if args.validate_only {
        if !report.is_empty() {
            print!("{report}");
        }
        return if report.errors.is_empty() {
            ExitCode::SUCCESS
        } else {
            ExitCode::from(EXIT_INVALID_SPEC)
        };
    }
    if !report.errors.is_empty() {
        eprint!("invalid-spec:\n{report}");
        return ExitCode::from(EXIT_INVALID_SPEC);
    }
    for w in &report.warnings {
        warn!("{w}");
    }

    if let Some(n) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            warn!("thread pool already initialised: {e}");
        }
    }
    let dir = args
        .out
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out").join(cfg.scenario.name()));
    // The stored config omits the output directory so re-runs can go anywhere.
    let resolved = config::RunConfig {
        output_dir: None,
        ..cfg.clone()
    }
    .to_toml();
    let mut run = match RunDir::create(
        &dir,
        cfg.scenario.name(),
        &resolved,
        cfg.master_seed,
        rayon::current_num_threads(),
    ) {
        Ok(r) => r,
        Err(e) => {
            error!("cannot prepare {}: {e}", dir.display());
            return ExitCode::from(EXIT_IO);
        }
    };
    info!("running {} into {}", cfg.scenario.name(), dir.display());
    let result = scenarios::run(&cfg, &mut run);
    let (err, code) = match &result {
        Ok(()) => (None, ExitCode::SUCCESS),
        Err(spinlens::Error::Io(e)) => (Some(e.to_string()), ExitCode::from(EXIT_IO)),
        Err(e @ spinlens::Error::InvalidSpec(_)) => {
            (Some(e.to_string()), ExitCode::from(EXIT_INVALID_SPEC))
        }
        Err(e) => (Some(e.to_string()), ExitCode::from(EXIT_NUMERICAL)),
    };
    if let Some(e) = &err {
        error!("run failed: {e}");
    }
    match run.finalize(err) {
        Ok(m) => info!(
            "done in {:.1}s, {} output files",
            m.wall_time_s,
            m.outputs.len()
        ),
        Err(e) => {
            error!("cannot finalize manifest: {e}");
            return ExitCode::from(EXIT_IO);
        }
    }
    code
}
