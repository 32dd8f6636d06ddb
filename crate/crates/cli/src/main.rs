//! `snls`: command-line front end for the snls-core experiments.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use config::{Overrides, RunConfig};
use output::Run;

#[derive(Debug, Parser)]
#[command(name = "snls", version, about = "Stochastic NLS experiments: solver checks, action bounds, Monte Carlo")]
struct Cli {
    /// Run configuration (TOML) or a manifest from an earlier run.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for Monte Carlo and sweeps (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
enum Command {
    /// Deterministic cubic solver against the exact soliton.
    SolitonCheck,
    /// One deterministic or noisy run from the chosen datum.
    Simulate,
    /// Closed-form upper and lower error exponents.
    Bounds,
    /// Soliton-parameter path and its action.
    CovSoliton,
    /// Amplitude-parametrized path (boundary value problem).
    CovAmplitude,
    /// Full soliton parametrization by shooting.
    CovFull,
    /// Exponents over a uniform γ grid.
    SweepGamma,
    /// Monte Carlo error probabilities for sent 0 and sent 1.
    McError,
    /// Monte Carlo crossing times of H¹ levels.
    McBlowup,
    /// Monte Carlo tails of the soliton shift.
    McShift,
    /// Action of a control extracted from a path.
    Rate,
    /// Monte Carlo over an ε grid compared with the exponents.
    Report,
    /// Re-executes the command recorded in `--config`.
    Run,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::SolitonCheck => "soliton-check",
            Command::Simulate => "simulate",
            Command::Bounds => "bounds",
            Command::CovSoliton => "cov-soliton",
            Command::CovAmplitude => "cov-amplitude",
            Command::CovFull => "cov-full",
            Command::SweepGamma => "sweep-gamma",
            Command::McError => "mc-error",
            Command::McBlowup => "mc-blowup",
            Command::McShift => "mc-shift",
            Command::Rate => "rate",
            Command::Report => "report",
            Command::Run => "run",
        }
    }

    fn from_name(name: &str) -> Option<Self> {
        use Command::*;
        [SolitonCheck, Simulate, Bounds, CovSoliton, CovAmplitude, CovFull, SweepGamma, McError, McBlowup, McShift, Rate, Report]
            .into_iter()
            .find(|c| c.name() == name)
    }
}

/// Error printed as `error[class]: detail`.
#[derive(Debug)]
pub struct CliError {
    pub class: String,
    pub detail: String,
}

impl CliError {
    pub fn new(class: &str, detail: impl Into<String>) -> Self {
        Self { class: class.into(), detail: detail.into() }
    }

    pub fn config(detail: impl Into<String>) -> Self {
        Self::new("config", detail)
    }
}

impl From<snls_core::Error> for CliError {
    fn from(e: snls_core::Error) -> Self {
        Self::new(e.class(), e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::new("io", e.to_string())
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let started = Instant::now();
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let command = match cli.command {
        Command::Run => Command::from_name(&cfg.command)
            .ok_or_else(|| CliError::config(format!("`run` needs a configuration naming a command, got `{}`", cfg.command)))?,
        c => c,
    };
    cfg.resolve(command.name())?;
    cfg.apply(&cli.overrides);
    if let Some(seed) = cli.seed {
        cfg.master_seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out_dir = out.to_string_lossy().into_owned();
    }
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::new("threads", e.to_string()))?;
    }
    let mut run = Run::new(cfg)?;
    match command {
        Command::SolitonCheck => commands::soliton_check(&mut run),
        Command::Simulate => commands::simulate(&mut run),
        Command::Bounds => commands::bounds(&mut run),
        Command::CovSoliton => commands::cov_soliton(&mut run),
        Command::CovAmplitude => commands::cov_amplitude(&mut run),
        Command::CovFull => commands::cov_full(&mut run),
        Command::SweepGamma => commands::sweep_gamma(&mut run),
        Command::McError => commands::mc_error(&mut run),
        Command::McBlowup => commands::mc_blowup(&mut run),
        Command::McShift => commands::mc_shift(&mut run),
        Command::Rate => commands::rate(&mut run),
        Command::Report => commands::report(&mut run),
        Command::Run => unreachable!("resolved above"),
    }?;
    run.finish(started.elapsed().as_secs_f64())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {}", e.class, e.detail.replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}
