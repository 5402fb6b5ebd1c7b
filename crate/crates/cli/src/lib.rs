//! Command-line runner for pathflow experiments.
//!
//! Every run reads one config file, writes a results table and, next to it, a
//! manifest with the resolved config, the code version, seed and thread
//! count. Exit codes: 0 when every check passes, 1 when a check fails or the
//! numerics break down, 2 for usage and config errors.

pub mod commands;
pub mod config;
pub mod results;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Parser;
use serde::Serialize;
use thiserror::Error;

use crate::commands::{execute, Command};
use crate::config::ExperimentConfig;
use crate::results::emit_results;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] pathflow::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("results: {0}")]
    Results(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use pathflow::Error as E;
        match self {
            Self::Core(
                E::ConstraintViolation { .. }
                | E::Ellipticity { .. }
                | E::Retraction { .. }
                | E::FrameMetric { .. },
            ) => EXIT_FAIL,
            _ => EXIT_USAGE,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "pathflow",
    version,
    about = "Path-space integration by parts and quasi-invariance experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub options: RunOptions,
}

#[derive(Debug, Clone, clap::Args)]
pub struct RunOptions {
    /// Experiment config (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,
    /// Overrides the config sample count.
    #[arg(long, global = true, value_name = "N")]
    pub samples: Option<usize>,
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true, env = "PATHFLOW_THREADS", value_name = "N")]
    pub threads: Option<usize>,
    /// Results file (default: `<command>.csv`).
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Overrides the flow stepper.
    #[arg(long, global = true, value_parser = ["euler", "heun"])]
    pub mode: Option<String>,
    /// Record measured wall times in the results file; otherwise they are
    /// written as zero so that reruns are byte-identical.
    #[arg(long, global = true)]
    pub timing: bool,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    config_path: String,
    results: String,
    seed: u64,
    samples: usize,
    threads: usize,
    timing: bool,
    pass: bool,
    wall_time_s: f64,
    row_wall_times_s: Vec<f64>,
    config: &'a ExperimentConfig,
}

pub fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".manifest.toml");
    PathBuf::from(name)
}

/// Applies the command-line overrides to the config file.
pub fn resolve_config(options: &RunOptions) -> Result<ExperimentConfig, CliError> {
    let path = options
        .config
        .as_ref()
        .ok_or_else(|| CliError::Usage("--config is required".into()))?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(seed) = options.seed {
        cfg.seed = seed;
    }
    if let Some(samples) = options.samples {
        cfg.samples = samples;
    }
    if let Some(mode) = &options.mode {
        cfg.flow.mode = mode.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn thread_count(options: &RunOptions) -> Result<usize, CliError> {
    match options.threads {
        Some(0) => Err(CliError::Usage("--threads must be positive".into())),
        Some(n) => Ok(n),
        None => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

/// Runs one command and returns its exit code.
pub fn run(cli: &Cli) -> Result<i32, CliError> {
    let started = Instant::now();
    let options = &cli.options;
    let cfg = resolve_config(options)?;
    let threads = thread_count(options)?;
    let out = options
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("{}.csv", cli.command.name())));

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let mut outcome = pool.install(|| execute(cli.command, &cfg))?;

    let row_wall_times_s: Vec<f64> = outcome.rows.iter().map(|r| r.wall_time_s).collect();
    if !options.timing {
        for row in &mut outcome.rows {
            row.wall_time_s = 0.0;
        }
    }
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    emit_results(&outcome.rows, &out)?;

    for row in &outcome.rows {
        println!(
            "{} {:<36} {:<8} n={:<7} lhs={:+.6e} rhs={:+.6e} z={:+.3}",
            if row.pass { "PASS" } else { "FAIL" },
            row.command,
            row.manifold,
            row.n_samples,
            row.lhs_mean,
            row.rhs_mean,
            row.z
        );
    }

    let manifest = Manifest {
        command: cli.command.name(),
        version: env!("CARGO_PKG_VERSION"),
        config_path: options
            .config
            .as_ref()
            .map(|p| p.display().to_string())
            .unwrap_or_default(),
        results: out.display().to_string(),
        seed: cfg.seed,
        samples: cfg.samples,
        threads,
        timing: options.timing,
        pass: outcome.pass,
        wall_time_s: started.elapsed().as_secs_f64(),
        row_wall_times_s,
        config: &cfg,
    };
    let text = toml::to_string(&manifest).map_err(|e| CliError::Results(e.to_string()))?;
    std::fs::write(manifest_path(&out), text)?;

    Ok(if outcome.pass { EXIT_PASS } else { EXIT_FAIL })
}

/// Parses `args` (program name first), runs the command and reports errors on
/// standard error.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("pathflow: {e}");
            e.exit_code()
        }
    }
}
