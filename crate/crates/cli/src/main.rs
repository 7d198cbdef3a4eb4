// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use commands::{run, Command, RunError};
use config::ExperimentConfig;
use output::Output;

/// Experiments on directed polymers in random environment.
#[derive(Debug, Parser)]
#[command(name = "dirpoly", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// TOML configuration; every key is optional.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides `run.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides `run.workers`.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Overrides `output.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Omit wall times and the write time so reruns are byte-identical.
    #[arg(long, global = true)]
    no_timestamp: bool,
}

fn resolve(cli: &Cli) -> Result<ExperimentConfig, RunError> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.run.seed = s;
    }
    if let Some(w) = cli.workers {
        cfg.run.workers = w;
    }
    if let Some(o) = &cli.out {
        cfg.output.dir = o.clone();
    }
    if cli.no_timestamp {
        cfg.output.timestamp = false;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cli: &Cli) -> Result<usize, RunError> {
    let cfg = resolve(cli)?;
    let echo = cfg.to_toml();
    let value = serde_json::to_value(&cfg).expect("configuration serializes");
    let mut out = Output::new(&cfg.output.dir, cfg.output.timestamp, echo, value);
    let result = run(cli.command, &cfg, &mut out);
    // partial results are still written when a command fails
    out.write()?;
    result.map(|_| out.records().len())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(n) => {
            eprintln!("{}: {n} record(s) written", cli.command.name());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("dirpoly {}: {e}", cli.command.name());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
