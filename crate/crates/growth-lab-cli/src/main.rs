//! growth-lab: numerical laboratory CLI. Every subcommand is deterministic
//! given (config, seed), writes its artifacts into --out, and finishes with
//! a manifest.json listing them.

mod commands;
mod config;
mod error;
mod manifest;

use clap::{Parser, Subcommand};
use std::path::PathBuf;

use crate::config::FileConfig;
use crate::error::{create_dir, CliError};

#[derive(Parser)]
#[command(
    name = "growth-lab",
    version,
    about = "Simulation, kinetic solvers, and estimation pipelines for randomly growing economies"
)]
struct Cli {
    /// TOML config file; missing sections use documented defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed for all Monte Carlo work.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output directory (created if absent).
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Never touch the network; serve remote sources from cache only.
    /// GROWTH_LAB_OFFLINE=1 in the environment has the same effect.
    #[arg(long, global = true)]
    offline: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Random monotone-map economy: trajectory, stationary sample, and the
    /// extreme-start uniqueness report.
    Simulate,
    /// Master-equation integration next to the mean-field closure, or Gamma
    /// density family curves in gamma_figure mode.
    Kinetics,
    /// Gamma fits per income year, reduced-form and structural regressions,
    /// forward filter, and table/figure CSVs.
    Estimate {
        /// GDP CSV path (overrides estimate.gdp in the config).
        #[arg(long)]
        gdp: Option<PathBuf>,
        /// Income histogram CSV path (overrides estimate.income).
        #[arg(long)]
        income: Option<PathBuf>,
    },
    /// Synthetic economy bundle: gdp.csv, income.csv, truth.json.
    Synth,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version are successful outcomes; anything else is a
            // validation failure.
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp
                | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}

fn offline_requested(flag: bool) -> bool {
    if flag {
        return true;
    }
    match std::env::var("GROWTH_LAB_OFFLINE") {
        Ok(v) => !v.is_empty() && v != "0" && v.to_lowercase() != "false",
        Err(_) => false,
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let file = FileConfig::load(cli.config.as_deref())?;
    create_dir(&cli.out)?;
    let manifest = match &cli.command {
        Command::Simulate => {
            let config = file.simulate.unwrap_or_default();
            commands::simulate::run(&config, &cli.out, cli.seed)?
        }
        Command::Kinetics => {
            let config = file.kinetics.unwrap_or_default();
            commands::kinetics::run(&config, &cli.out, cli.seed)?
        }
        Command::Estimate { gdp, income } => {
            let config = file.estimate.unwrap_or_default();
            commands::estimate::run(
                &config,
                gdp.as_deref(),
                income.as_deref(),
                &cli.out,
                cli.seed,
                offline_requested(cli.offline),
            )?
        }
        Command::Synth => {
            let config = file.synth.unwrap_or_else(config::default_synth_config);
            commands::synth::run(&config, &cli.out, cli.seed)?
        }
    };
    log::info!(
        "{}: wrote {} outputs + manifest.json in {}",
        manifest.command,
        manifest.outputs.len(),
        cli.out.display()
    );
    Ok(())
}
