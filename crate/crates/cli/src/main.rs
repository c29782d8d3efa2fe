use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gla_cli::run::{Experiment, RunError};
use gla_cli::{load, run_experiment, verify_experiment};

#[derive(Parser)]
#[command(name = "gla", version, about = "Generalized Laplace Analysis experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write results.csv, results.json, lattice.csv and plots
    Run {
        config: PathBuf,
        /// Output directory (overrides output_dir in the config)
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, env = "GLA_JOBS")]
        jobs: Option<usize>,
    },
    /// Run an experiment and check every projection against its oracle
    Verify {
        config: PathBuf,
        #[arg(long, env = "GLA_JOBS")]
        jobs: Option<usize>,
    },
    /// Print the circle decomposition of the configured lattice
    Lattice { config: PathBuf },
}

fn default_jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprint!("gla: {e}");
            if !matches!(e, RunError::Validation(_)) {
                eprintln!();
            }
            ExitCode::from(e.exit_code())
        }
    }
}

fn dispatch(command: Command) -> Result<(), RunError> {
    match command {
        Command::Run { config, out, jobs } => {
            let cfg = load(&config)?;
            let summary = run_experiment(cfg, out.as_deref(), jobs.unwrap_or_else(default_jobs))?;
            println!("{} rows written to {}", summary.rows, summary.output_dir.display());
            if let Some((_, checked)) = summary.verification {
                println!("verified {checked} rows against their bounds");
            }
        }
        Command::Verify { config, jobs } => {
            let cfg = load(&config)?;
            let (result, checked) = verify_experiment(cfg, jobs.unwrap_or_else(default_jobs))?;
            println!("ok: {checked} of {} rows checked, all within bound", result.rows.len());
        }
        Command::Lattice { config } => {
            let exp = Experiment::prepare(load(&config)?)?;
            print!("{}", exp.decomposition.describe());
        }
    }
    Ok(())
}
