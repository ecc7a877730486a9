//! Scenario-driven command line front end for the qkdlab simulator.
//!
//! Exit codes: 0 on success, 1 on any error, 2 when a protocol run aborts
//! because the check-bit QBER exceeded its threshold.

pub mod commands;
pub mod scenario;
pub mod sweep;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use qkdlab_core::Exec;

pub use commands::Outcome;

#[derive(Debug, Parser)]
#[command(name = "qkdlab", version, about = "Desk-scale quantum key distribution lab")]
pub struct Cli {
    /// Run every data-parallel kernel on the calling thread.
    #[arg(long, global = true)]
    pub sequential: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a scenario and write session.json, histogram.json and report.csv.
    Run {
        scenario: PathBuf,
        #[arg(long, default_value = "qkdlab-out")]
        out: PathBuf,
        /// Overrides the scenario seed and QKDLAB_SEED.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Parse or emit OpenQASM 2.0.
    Qasm {
        #[command(subcommand)]
        action: QasmAction,
    },
    /// Sweep one scenario parameter over a grid and write sweep.csv.
    Sweep {
        scenario: PathBuf,
        sweep: PathBuf,
        #[arg(long, default_value = "qkdlab-out")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Single-qubit tomography of a received qubit; writes tomography.json.
    Tomo {
        scenario: PathBuf,
        #[arg(long)]
        qubit: usize,
        /// Shots per measurement setting.
        #[arg(long)]
        shots: Option<u64>,
        #[arg(long, default_value = "qkdlab-out")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Debug, Subcommand)]
pub enum QasmAction {
    /// Parse a .qasm file and print a summary.
    Parse {
        file: PathBuf,
        /// Print the canonical re-emitted program instead of a summary.
        #[arg(long)]
        canonical: bool,
    },
    /// Emit the transmission circuit of a scenario.
    Emit {
        scenario: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

pub fn execute(cli: &Cli) -> anyhow::Result<Outcome> {
    let exec = if cli.sequential { Exec::Sequential } else { Exec::default() };
    match &cli.command {
        Command::Run { scenario, out, seed } => commands::cmd_run(scenario, out, *seed, exec),
        Command::Qasm { action: QasmAction::Parse { file, canonical } } => commands::cmd_qasm_parse(file, *canonical),
        Command::Qasm { action: QasmAction::Emit { scenario, out, seed } } => {
            commands::cmd_qasm_emit(scenario, out.as_deref(), *seed)
        }
        Command::Sweep { scenario, sweep, out, seed } => commands::cmd_sweep(scenario, sweep, out, *seed, exec),
        Command::Tomo { scenario, qubit, shots, out, seed } => {
            commands::cmd_tomo(scenario, *qubit, *shots, out, *seed, exec)
        }
    }
}

/// Runs the command and maps the result onto the exit-code contract.
pub fn exit_code(cli: &Cli) -> i32 {
    match execute(cli) {
        Ok(outcome) => outcome.exit_code(),
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}
