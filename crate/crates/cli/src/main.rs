//! `anchormi`: controlled multiple imputation, analysis, oracles and
//! simulation from the command line.

mod cmd;
mod error;
mod manifest;

use std::io::Write;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "anchormi", version, about = "Controlled multiple imputation with information-anchoring diagnostics")]
struct Cli {
    /// Worker threads for replicates and imputations (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write K completed datasets and a manifest.
    Impute(cmd::impute::ImputeArgs),
    /// Pool ANCOVA fits with Rubin's rules for each strategy.
    Analyze(cmd::analyze::AnalyzeArgs),
    /// Run a Monte Carlo study from a config file.
    Simulate(cmd::simulate::SimulateArgs),
    /// Evaluate a closed-form expectation.
    Oracle(cmd::oracle::OracleArgs),
}

fn run(cli: &Cli) -> CliResult<()> {
    if let Some(j) = cli.jobs {
        if j == 0 {
            return Err(CliError::Usage("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    match &cli.command {
        Command::Impute(a) => cmd::impute::run(a),
        Command::Analyze(a) => cmd::analyze::run(a),
        Command::Simulate(a) => cmd::simulate::run(a),
        Command::Oracle(a) => cmd::oracle::run(a),
    }
}

/// Write to stdout; a reader that closed the pipe early is not an error.
pub(crate) fn emit(text: &str) -> CliResult<()> {
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            for line in e.json_lines() {
                eprintln!("{line}");
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
