use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use icd_core::Execution;

mod commands;
mod config;
mod error;
mod output;

use config::{Overrides, RunConfig};
use error::Result;

/// Risk contribution attribution split into inherent and correlation parts.
#[derive(Parser)]
#[command(name = "icd", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Attribution at the as-of date, by asset and by group.
    Report(Common),
    /// Rolling attribution over the data history.
    History {
        #[command(flatten)]
        common: Common,
        /// 1: today's positions on every window; 2: positions as they were.
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=2))]
        method: u8,
    },
    /// Expanding-window convergence simulation.
    Simulate(Common),
    /// How far the sum of iVols is from portfolio volatility.
    Gap(Common),
}

#[derive(Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    overrides: Overrides,
    /// Evaluate windows on one thread.
    #[arg(long)]
    sequential: bool,
}

impl Common {
    fn resolve(&self) -> Result<(RunConfig, Execution)> {
        let mut cfg = RunConfig::load(&self.config)?;
        cfg.apply(&self.overrides);
        let exec = if self.sequential {
            Execution::Sequential
        } else {
            Execution::Parallel
        };
        Ok((cfg, exec))
    }
}

fn run(cli: Cli) -> Result<output::OutputDir> {
    match cli.command {
        Command::Report(c) => {
            let (cfg, _) = c.resolve()?;
            commands::report(&cfg)
        }
        Command::History { common, method } => {
            let (cfg, exec) = common.resolve()?;
            commands::history(&cfg, method, exec)
        }
        Command::Simulate(c) => {
            let (cfg, exec) = c.resolve()?;
            commands::simulate(&cfg, exec)
        }
        Command::Gap(c) => {
            let (cfg, _) = c.resolve()?;
            commands::gap(&cfg)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(out) => {
            for path in out.written() {
                println!("{}", path.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("icd: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
