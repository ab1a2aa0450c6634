use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use wingwrap_core::harness::{run_command, Command, HarnessError, Invocation, THREADS_ENV};

/// Wing-wrap perching experiments.
#[derive(Debug, Parser)]
#[command(name = "wingwrap", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Debug, Subcommand)]
enum Sub {
    /// Run the single toss described in the [trial] section.
    Trial(Args),
    /// Run the mass sweep described in the [plan] section.
    Sweep(Args),
    /// Search the minimum perching speed of the nominal toss.
    MinSpeed(Args),
    /// Four-level tip-mass sweep with per-level speed searches and the
    /// collide/overlap split.
    ReplicatePaper(Args),
}

#[derive(Debug, clap::Args)]
struct Args {
    /// TOML experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (created if missing).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override master_seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the trials per sweep cell.
    #[arg(long)]
    trials: Option<usize>,
    /// Also write trajectory.csv for this trial id.
    #[arg(long, value_name = "TRIAL_ID")]
    emit_trajectory: Option<usize>,
}

fn invocation(cli: Cli) -> Invocation {
    let (command, a) = match cli.command {
        Sub::Trial(a) => (Command::Trial, a),
        Sub::Sweep(a) => (Command::Sweep, a),
        Sub::MinSpeed(a) => (Command::MinSpeed, a),
        Sub::ReplicatePaper(a) => (Command::ReplicatePaper, a),
    };
    Invocation {
        command,
        config: a.config,
        out: a.out,
        seed: a.seed,
        trials: a.trials,
        emit_trajectory: a.emit_trajectory,
    }
}

fn thread_pool() -> anyhow::Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(value) = std::env::var(THREADS_ENV) {
        let n: usize = value
            .parse()
            .with_context(|| format!("{THREADS_ENV} must be a positive integer, got {value:?}"))?;
        anyhow::ensure!(n > 0, "{THREADS_ENV} must be a positive integer, got 0");
        builder = builder.num_threads(n);
    }
    Ok(builder.build()?)
}

fn main() -> ExitCode {
    let inv = invocation(Cli::parse());
    let pool = match thread_pool() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    match pool.install(|| run_command(&inv)) {
        Ok(outcome) => {
            print!("{}", outcome.summary);
            println!("wrote {}", outcome.out_dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &HarnessError) -> u8 {
    e.exit_code().clamp(1, 255) as u8
}
