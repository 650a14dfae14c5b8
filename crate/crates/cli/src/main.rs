//! `potlab` experiment runner.
//!
//! Each subcommand reads an optional TOML config, runs its checks and writes
//! `summary.txt`, `data.csv` (plus command-specific tables) and
//! `plots/*.svg` under `--out`. The exit code is 0 when every check passed,
//! 1 when a check failed and 2 on invalid input or I/O errors.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use config::ExperimentConfig;

#[derive(Parser)]
#[command(name = "potlab", version, about = "Potential theory experiments on finite spaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML experiment config; missing fields take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Seed for every random stream (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true, default_value = "potlab-out")]
    out: PathBuf,

    /// Worker threads (overrides the config; 0 means all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Check tolerance for capacity agreement and solver residuals.
    #[arg(long, global = true)]
    tol: Option<f64>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Embedding bounds and the sublinear equation on a suite or one kernel.
    VerifyTheorem,
    /// Equilibrium measures and capacities.
    Capacity,
    /// Picard iteration for u = G(u^q sigma).
    Solve,
    /// Truncation sweep of the Riesz counterexample.
    Counterexample,
    /// Weak maximum principle and quasi-symmetry constants.
    Wmp,
    /// All checks in one run.
    Report,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::VerifyTheorem => "verify-theorem",
            Command::Capacity => "capacity",
            Command::Solve => "solve",
            Command::Counterexample => "counterexample",
            Command::Wmp => "wmp",
            Command::Report => "report",
        }
    }
}

fn run(cli: &Cli) -> Result<bool> {
    let mut cfg = ExperimentConfig::load(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(jobs) = cli.jobs {
        cfg.jobs = jobs;
    }
    if let Some(tol) = cli.tol {
        cfg.override_tol(tol);
    }
    cfg.validate()?;
    rayon::ThreadPoolBuilder::new().num_threads(cfg.jobs).build_global().context("starting the worker pool")?;

    let outcome = match cli.command {
        Command::VerifyTheorem => commands::verify_theorem(&cfg),
        Command::Capacity => commands::capacity(&cfg),
        Command::Solve => commands::solve(&cfg),
        Command::Counterexample => commands::counterexample(&cfg),
        Command::Wmp => commands::wmp(&cfg),
        Command::Report => commands::report(&cfg),
    }?;

    let mut header = toml::Table::new();
    header.insert("command".into(), cli.command.name().into());
    header.insert("seed".into(), toml::Value::Integer(cfg.seed as i64));
    header.insert("config".into(), toml::Value::try_from(&cfg)?);
    let written = outcome.write(&cli.out, &header)?;

    println!("{}: {}", cli.command.name(), if outcome.passed { "pass" } else { "FAIL" });
    for (k, v) in &outcome.results {
        println!("  {k} = {v}");
    }
    for path in written {
        println!("  wrote {}", path.display());
    }
    Ok(outcome.passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
