//! `sparsemix`: simulate, separate, evaluate and report sparsely
//! overlapping two-speaker mixtures.

mod commands;
mod config;
mod mixset;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use commands::Outcome;
use config::{RunConfig, SEED_ENV};

#[derive(Debug, Parser)]
#[command(name = "sparsemix", version, about)]
struct Cli {
    /// JSON run configuration; flags shadow its keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run seed (overrides SPARSEMIX_SEED and the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for the across-mixture pool.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    ToyCorpus(commands::toy::ToyArgs),
    Simulate(commands::simulate::SimulateArgs),
    OracleEmbed(commands::oracle_embed::OracleEmbedArgs),
    Separate(commands::separate::SeparateArgs),
    Evaluate(commands::evaluate::EvaluateArgs),
    Report(commands::report::ReportArgs),
}

fn init_logging() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format(|buf, rec| {
            writeln!(
                buf,
                "level={} target={} msg={:?}",
                rec.level().as_str().to_lowercase(),
                rec.target(),
                rec.args().to_string()
            )
        })
        .init();
}

fn run(cli: Cli) -> Result<Outcome> {
    if let Some(n) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the worker pool")?;
    }
    let mut cfg = RunConfig::resolve(
        cli.config.as_deref(),
        std::env::var(SEED_ENV).ok(),
        cli.seed,
    )?;
    match &cli.command {
        Command::ToyCorpus(a) => commands::toy::run(a),
        Command::Simulate(a) => commands::simulate::run(a, &mut cfg),
        Command::OracleEmbed(a) => commands::oracle_embed::run(a, &mut cfg),
        Command::Separate(a) => commands::separate::run(a, &mut cfg),
        Command::Evaluate(a) => commands::evaluate::run(a, &mut cfg),
        Command::Report(a) => commands::report::run(a, &mut cfg),
    }
}

fn main() -> ExitCode {
    init_logging();
    match run(Cli::parse()) {
        Ok(Outcome::Complete) => ExitCode::SUCCESS,
        Ok(Outcome::Partial) => ExitCode::from(2),
        Err(e) => {
            log::error!("{e:#}");
            ExitCode::from(1)
        }
    }
}
