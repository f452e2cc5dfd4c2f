//! `sentcast`: batch runner for the forecasting pipeline.
//!
//! ```text
//! sentcast preprocess --config run.toml
//! sentcast features   --config run.toml
//! sentcast analyze    --config run.toml
//! sentcast train      --config run.toml --epochs 50 --feature-set HLOVE
//! sentcast predict    --config run.toml
//! sentcast evaluate   --config run.toml
//! sentcast gridsearch --config run.toml
//! sentcast report     --config run.toml
//! ```
//!
//! Exit status: 0 success, 1 internal error, 2 missing input or earlier
//! artifact, 3 invalid configuration or data. `SENTCAST_LOG` sets the log
//! filter (default `warn`).

mod artifacts;
mod commands;
mod config;
mod error;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::artifacts::Layout;
use crate::commands::{analysis, data, fixture, modelling};
use crate::config::{Overrides, RunConfig};
use crate::error::CliResult;

#[derive(Debug, Parser)]
#[command(name = "sentcast", version, about = "Sentiment- and embedding-augmented close-price forecasting")]
struct Cli {
    /// Worker threads for per-ticker, per-window and per-grid-point work
    /// (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Filter and clean the tweet corpus.
    Preprocess(Overrides),
    /// Aggregate daily text features and build aligned panels.
    Features(Overrides),
    /// Correlation tables, embedding probe and return statistics.
    Analyze(Overrides),
    /// Train every configured model run and write checkpoints.
    Train(Overrides),
    /// Forecast the test windows with trained checkpoints.
    Predict(Overrides),
    /// Metrics per ticker and model, with the composite ranking.
    Evaluate(Overrides),
    /// Hyperparameter grid search on the training region.
    Gridsearch(Overrides),
    /// Consolidated report and plot data.
    Report(Overrides),
    /// preprocess, features, analyze, train, predict, evaluate and report in
    /// sequence.
    Pipeline(Overrides),
    /// Finite-difference gradient checks of every model component.
    Selfcheck {
        #[arg(long, default_value_t = 10)]
        seeds: u64,
    },
    /// Write a synthetic input set and config.
    #[command(hide = true)]
    Fixture(fixture::FixtureArgs),
}

type Step = fn(&RunConfig, &Layout) -> CliResult<()>;

const PIPELINE: [Step; 7] = [
    data::preprocess,
    data::features,
    analysis::analyze,
    modelling::train,
    modelling::predict,
    modelling::evaluate,
    analysis::report,
];

fn with_config(o: &Overrides, steps: &[Step]) -> CliResult<()> {
    let cfg = RunConfig::load(o)?;
    let out = Layout::new(cfg.paths.output.clone());
    steps.iter().try_for_each(|step| step(&cfg, &out))
}

fn run(cli: Cli) -> CliResult<()> {
    let jobs = cli.jobs;
    sentcast::parallel::with_jobs(jobs, move || match &cli.command {
        Command::Preprocess(o) => with_config(o, &[data::preprocess]),
        Command::Features(o) => with_config(o, &[data::features]),
        Command::Analyze(o) => with_config(o, &[analysis::analyze]),
        Command::Train(o) => with_config(o, &[modelling::train]),
        Command::Predict(o) => with_config(o, &[modelling::predict]),
        Command::Evaluate(o) => with_config(o, &[modelling::evaluate]),
        Command::Gridsearch(o) => with_config(o, &[modelling::gridsearch]),
        Command::Report(o) => with_config(o, &[analysis::report]),
        Command::Pipeline(o) => with_config(o, &PIPELINE),
        Command::Selfcheck { seeds } => fixture::selfcheck(*seeds),
        Command::Fixture(args) => fixture::fixture(args),
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SENTCAST_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(3) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
