//! `eor`: rank candidate pools, trace and audit the equal-opportunity
//! slack δ, certify EOR prefixes, and run the synthetic comparisons.
//!
//! Exit codes: 0 success, 2 input error, 3 semantic or constraint error,
//! 4 numerical or certificate failure.

mod commands;
mod error;
mod io;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::{AuditArgs, CalibrateArgs, CompareArgs, RankArgs, SimulateArgs, TraceArgs, VerifyArgs};
use crate::error::CliResult;

#[derive(Debug, Parser)]
#[command(name = "eor", version, about = "Equal-opportunity ranking under disparate uncertainty")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Rank a pool with one policy: rank,id,group,prob.
    Rank(RankArgs),
    /// Per-prefix δ, total cost and group costs of a policy's ranking.
    Trace(TraceArgs),
    /// δ of logged rankings against the EOR ranking of the same candidates.
    Audit(AuditArgs),
    /// Dual certificate for EOR prefixes; exits 4 if any check fails.
    Verify(VerifyArgs),
    /// Per-run unfairness and effectiveness on a synthetic scenario.
    Simulate(SimulateArgs),
    /// Mean and standard error per policy, on a scenario or a single pool.
    Compare(CompareArgs),
    /// Platt recalibration of a labeled pool's probabilities.
    Calibrate(CalibrateArgs),
}

fn run(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Rank(a) => commands::rank(a),
        Command::Trace(a) => commands::trace(a),
        Command::Audit(a) => commands::audit(a),
        Command::Verify(a) => commands::verify(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Compare(a) => commands::compare(a),
        Command::Calibrate(a) => commands::calibrate(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("eor: error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
