mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{CommandFactory, FromArgMatches, Parser, Subcommand};

use smogcast::models::Family;

use commands::Ctx;
use config::RunConfig;
use error::CliError;

/// Hourly air-pollution forecasting for a target station from a nearby
/// source station.
#[derive(Debug, Parser)]
#[command(name = "smogcast", version)]
struct Cli {
    /// TOML run configuration.
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,
    /// Override one key, e.g. `--set train.lr=1e-3`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    sets: Vec<String>,
    /// Shorthand for `--set model.family=...`.
    #[arg(long, global = true)]
    family: Option<Family>,
    /// Use upstream artifacts even if they were produced by another config.
    #[arg(long, global = true)]
    force: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write seeded synthetic station CSVs to paths.source and paths.target.
    Synth,
    /// Parse, mask outliers and interpolate both station CSVs.
    Ingest,
    /// Split, select features, scale and build window pairs.
    Preprocess,
    /// Train the configured model family.
    Train,
    /// Grid search with cross-validation over training and validation pairs.
    Search {
        /// Parallel workers; 0 uses every core.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Test-set metrics, forecasts and significance tests for trained models.
    Evaluate {
        /// Families to evaluate; default is every trained model in the workdir.
        #[arg(long = "model", value_name = "FAMILY")]
        models: Vec<Family>,
    },
    /// Forecast the target station from one source-station window.
    Forecast {
        /// Source-station CSV holding exactly one input window.
        #[arg(long)]
        input: PathBuf,
        /// Output CSV.
        #[arg(long)]
        output: PathBuf,
    },
    /// Print the resolved configuration as TOML.
    ShowConfig,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut sets = cli.sets;
    if let Some(f) = cli.family {
        sets.push(format!("model.family=\"{}\"", f.name()));
    }
    let cfg = RunConfig::load(cli.config.as_deref(), std::env::vars(), &sets)?;
    let ctx = Ctx {
        cfg,
        force: cli.force,
    };
    match cli.command {
        Command::Synth => commands::cmd_synth(&ctx),
        Command::Ingest => commands::cmd_ingest(&ctx),
        Command::Preprocess => commands::cmd_preprocess(&ctx),
        Command::Train => commands::cmd_train(&ctx),
        Command::Search { jobs } => commands::cmd_search(&ctx, jobs),
        Command::Evaluate { models } => commands::cmd_evaluate(&ctx, &models),
        Command::Forecast { input, output } => commands::cmd_forecast(&ctx, &input, &output),
        Command::ShowConfig => {
            print!("{}", toml::to_string(&ctx.cfg).map_err(|e| CliError::Config(e.to_string()))?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let matches = Cli::command().after_help(config::help_text()).get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("smogcast: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
