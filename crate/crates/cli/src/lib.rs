//! Command-line frontend for `sprdyn-core`: config files, CSV and JSON outputs.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod io;

use clap::{Parser, Subcommand};

use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "sprdyn", version, about = "Dynamics, verification and identification for spherical parallel robots")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Actuator torques along a trajectory, as CSV.
    Torque(commands::TorqueArgs),
    /// Run the oracle property suite; exit 1 if any check fails.
    Verify(commands::VerifyArgs),
    /// Base-parameter reduction map.
    Reduce(commands::ReduceArgs),
    /// Least-squares base-parameter identification.
    Identify(commands::IdentifyArgs),
    /// Closed-loop tracking with inverse dynamics or Slotine-Li control.
    Simulate(commands::SimulateArgs),
}

pub fn run(cli: &Cli) -> CliResult<u8> {
    match &cli.command {
        Command::Torque(a) => commands::torque(a),
        Command::Verify(a) => commands::verify(a),
        Command::Reduce(a) => commands::reduce(a),
        Command::Identify(a) => commands::identify(a),
        Command::Simulate(a) => commands::simulate(a),
    }
}

/// Exit status for an error, after printing it.
pub fn report_error(e: &CliError) -> u8 {
    eprintln!("error: {e}");
    e.exit_code()
}
