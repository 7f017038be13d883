//! `hdmr` — fit additive GP models over projected inputs, predict with
//! uncertainty, and impute missing input values by inverse lookup.

mod commands;
mod config;
mod experiments;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand};

use config::RunConfig;

#[derive(Parser)]
#[command(
    name = "hdmr",
    version,
    about = "Additive GP modelling and missing-value imputation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides [run].seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides [run].out.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset (and optionally withhold values).
    Gen(CommonArgs),
    /// Train a model and write it with its fit report.
    Fit(CommonArgs),
    /// Predict (optionally with standard deviations) on a dataset.
    Predict {
        #[command(flatten)]
        common: CommonArgs,
        /// Trained model file.
        #[arg(long)]
        model: PathBuf,
    },
    /// Fill single missing values per row through a first-order model.
    Impute {
        #[command(flatten)]
        common: CommonArgs,
        /// Trained model file.
        #[arg(long)]
        model: PathBuf,
    },
    /// Compute metrics: model RMSE and/or imputation RMSE vs ground truth.
    Eval {
        /// TOML run configuration (not needed with --experiment).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Trained model file to score.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Run a named built-in reproduction instead of a config.
        #[arg(long)]
        experiment: Option<String>,
        /// Overrides [run].seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory; overrides [run].out.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(common: &CommonArgs) -> Result<(RunConfig, u64, PathBuf)> {
    let config = RunConfig::load(&common.config)?;
    let seed = common.seed.unwrap_or(config.run.seed);
    let out = commands::resolve_out(common.out.clone(), &config);
    Ok((config, seed, out))
}

fn run() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Gen(common) => {
            let (config, seed, out) = load(&common)?;
            commands::cmd_gen(&config, seed, &out)
        }
        Command::Fit(common) => {
            let (config, seed, out) = load(&common)?;
            commands::cmd_fit(&config, seed, &out)
        }
        Command::Predict { common, model } => {
            let (config, seed, out) = load(&common)?;
            commands::cmd_predict(&config, seed, &out, &model)
        }
        Command::Impute { common, model } => {
            let (config, seed, out) = load(&common)?;
            commands::cmd_impute(&config, seed, &out, &model)
        }
        Command::Eval {
            config,
            model,
            experiment,
            seed,
            out,
        } => match (config, experiment) {
            (None, Some(name)) => {
                let out = out.unwrap_or_else(|| PathBuf::from("out"));
                experiments::run_experiment(&name, seed.unwrap_or(0), &out)
            }
            (Some(config_path), None) => {
                let config = RunConfig::load(&config_path)?;
                let seed = seed.unwrap_or(config.run.seed);
                let out = commands::resolve_out(out, &config);
                commands::cmd_eval(&config, seed, &out, model.as_deref())
            }
            (Some(_), Some(_)) => bail!("pass either --config or --experiment, not both"),
            (None, None) => bail!("eval needs --config or --experiment"),
        },
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
