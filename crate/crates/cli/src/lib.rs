//! Command-line front end: `solve`, `derivative`, `capacity` and `witness`
//! driven by a TOML file with `--set key=value` overrides.
//!
//! Exit codes: 0 on success, 2 for configuration errors, 3 for numerical
//! failures (including any non-finite output).

pub mod commands;
pub mod config;
pub mod error;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

pub use commands::Artifacts;
pub use config::RunConfig;
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "boxvi",
    version,
    about = "Second-kind VIs with an L1 term: solves, derivatives, capacities, witness sweeps"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output file; standard output when absent.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set problem.f=const:2`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Suppress the summary line on standard error.
    #[arg(long, global = true)]
    pub quiet: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Solve the VI by both formulations and cross-check them.
    Solve,
    /// Directional derivative of the solution map with a finite-difference table.
    Derivative,
    /// Capacity of the configured node set and its equilibrium potential.
    Capacity,
    /// Refinement sweep of the non-polyhedricity witness (CSV).
    Witness,
}

/// Runs `command` against a loaded configuration.
pub fn execute(
    command: Command,
    cfg: &RunConfig,
    out: Option<&Path>,
) -> Result<Artifacts, CliError> {
    match command {
        Command::Solve => commands::cmd_solve(cfg),
        Command::Derivative => commands::cmd_derivative(cfg, out),
        Command::Capacity => commands::cmd_capacity(cfg),
        Command::Witness => commands::cmd_witness(cfg),
    }
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text)
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

/// Loads the configuration, runs the command and writes its artifacts.
pub fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = RunConfig::load(cli.config.as_deref(), &cli.overrides)?;
    let artifacts = execute(cli.command, &cfg, cli.out.as_deref())?;
    match &cli.out {
        Some(path) => write(path, &artifacts.main)?,
        None => print!("{}", artifacts.main),
    }
    for (path, text) in &artifacts.side {
        write(path, text)?;
    }
    if !cli.quiet {
        eprintln!("{}", artifacts.summary);
    }
    Ok(())
}
