//! `fold`: configuration-driven fold certification and solution counting.
//!
//! Exit codes: 0 success, 1 usage error, 2 failed hypothesis, 3 numeric
//! failure.

mod commands;
mod config;
mod error;
mod rhs;
mod setup;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::{load, Overrides, ENV_PREFIX};
use crate::error::CliError;

#[derive(Parser)]
#[command(name = "fold", version, about = "Global-fold certification and exact solution counts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the amenability and compatibility checks.
    Check(Common),
    /// Count and compute the solutions of F(u) = g.
    Solve(Common),
    /// Sample heights along seeded fibers.
    Fiber(Common),
    /// Locate the fold apex on seeded fibers.
    Fold(Common),
    /// Compare the solver with the brute-force oracle and run the proof-step checks.
    Oracle(Common),
}

#[derive(Args)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Overrides the configured seed.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Proceed past failed hypothesis checks.
    #[arg(long)]
    force: bool,
    /// Overrides the configured output directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (common, command) = match &cli.command {
        Command::Check(c) => (c, "check"),
        Command::Solve(c) => (c, "solve"),
        Command::Fiber(c) => (c, "fiber"),
        Command::Fold(c) => (c, "fold"),
        Command::Oracle(c) => (c, "oracle"),
    };
    let env: Vec<(String, String)> = std::env::vars().filter(|(k, _)| k.starts_with(ENV_PREFIX)).collect();
    let flags = Overrides {
        seed: common.seed,
        output_dir: common.out.clone(),
    };
    let loaded = load(&common.config, &env, &flags)?;
    match command {
        "check" => commands::run_check(&loaded),
        "solve" => commands::run_solve(&loaded, common.force),
        "fiber" => commands::run_fiber(&loaded, common.force),
        "fold" => commands::run_fold(&loaded, common.force),
        _ => commands::run_oracle(&loaded, common.force),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fold: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
