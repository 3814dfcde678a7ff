//! `fms` — batch front end for functional mean shift clustering.
//!
//! Subcommands wire the preprocessing pipeline, the full and stochastic
//! clustering runs, the diagnostics suite and a scaling benchmark into
//! reproducible, seeded commands. Exit codes: 0 success, 2 configuration
//! error, 3 data error, 4 non-convergence under `--strict`.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;

use config::{AppConfig, Overrides};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Data(fms_core::Error),
    NonConvergence,
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::NonConvergence => 4,
        }
    }

    fn code(&self) -> String {
        match self {
            CliError::Config(_) => "InvalidConfig".into(),
            CliError::Data(e) => e.code().into(),
            CliError::NonConvergence => "NonConvergence".into(),
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Config(m) => m.clone(),
            CliError::Data(e) => e.to_string(),
            CliError::NonConvergence => "run did not converge within max_iters".into(),
        }
    }
}

impl From<fms_core::Error> for CliError {
    fn from(e: fms_core::Error) -> Self {
        match e {
            fms_core::Error::InvalidConfig(m) => CliError::Config(m),
            other => CliError::Data(other),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(fms_core::Error::Io(e))
    }
}

#[derive(Parser, Debug)]
#[command(name = "fms", version, about = "Functional mean shift clustering")]
struct Cli {
    /// Configuration file (TOML); flags below override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// RNG seed for every randomized step.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Clustering algorithm: full or stochastic.
    #[arg(long, global = true)]
    mode: Option<String>,

    /// Target subset size for the stochastic algorithm.
    #[arg(long, global = true)]
    subset_size: Option<usize>,

    /// Stopping threshold on the largest per-member shift.
    #[arg(long, global = true)]
    epsilon: Option<f64>,

    /// Iteration budget.
    #[arg(long, global = true)]
    max_iters: Option<usize>,

    /// Influence range: a number, or `auto` to estimate from the data.
    #[arg(long, global = true)]
    tau: Option<String>,

    /// Bandwidth schedule: paper or constant.
    #[arg(long, global = true)]
    schedule: Option<String>,

    /// Bandwidth for the constant schedule.
    #[arg(long, global = true)]
    h0: Option<f64>,

    /// Worker thread cap (results are identical for any value).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Exit nonzero when the run does not converge.
    #[arg(long, global = true)]
    strict: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Preprocess a measurement CSV into a function set.
    Ingest {
        /// Input CSV (`platform,time,lat,lon,pressure,value,variable`),
        /// optionally gzip-compressed (`.gz`).
        input: PathBuf,
    },
    /// Cluster a function set and write labels, centers and the run trace.
    Cluster {
        /// Function set file (CSV, or `.bin` for the binary matrix format).
        data: PathBuf,
    },
    /// Run the numerical diagnostics suite on a function set.
    Diagnose { data: PathBuf },
    /// Measure full versus stochastic per-iteration wall time.
    Bench,
    /// Generate a labeled synthetic function set.
    Synth,
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(CliError::Config("--threads must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Config(format!("cannot configure thread pool: {e}")))?;
    }
    let mut cfg = AppConfig::load(cli.config.as_deref())?;
    cfg.apply_overrides(&Overrides {
        seed: cli.seed,
        mode: cli.mode,
        subset_size: cli.subset_size,
        epsilon: cli.epsilon,
        max_iters: cli.max_iters,
        tau: cli.tau,
        schedule: cli.schedule,
        h0: cli.h0,
    })?;
    std::fs::create_dir_all(&cli.out)?;
    match cli.command {
        Command::Ingest { input } => commands::ingest::run(&input, &cfg, &cli.out),
        Command::Cluster { data } => commands::cluster::run(&data, &mut cfg, &cli.out, cli.strict),
        Command::Diagnose { data } => commands::diagnose::run(&data, &mut cfg, &cli.out),
        Command::Bench => commands::bench::run(&cfg, &cli.out),
        Command::Synth => commands::synth::run(&cfg, &cli.out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let json = serde_json::json!({
                "error": err.code(),
                "message": err.message(),
            });
            eprintln!("{json}");
            ExitCode::from(err.exit_code())
        }
    }
}
