//! `retarget`: end-to-end driver for seed generation, preprocessing, height
//! augmentation, manager training, retargeting, flow-head training,
//! evaluation and reporting.
//!
//! Exit codes: 0 success, 1 invalid configuration or input, 2 runtime failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use retarget_cli::config::RunConfig;
use retarget_cli::{logging, stages};
use retarget_core::Error;

#[derive(Parser)]
#[command(name = "retarget", version, about = "Retarget end-effector episodes onto a whole-body humanoid")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Override the global seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the output root.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, short, global = true)]
    verbose: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Generate synthetic source episodes.
    GenSeeds,
    /// Map source episodes into the target workspace.
    Preprocess,
    /// Add torso-height variants.
    Augment,
    /// Train one manager per configured mode.
    TrainManager,
    /// Retarget preprocessed episodes into triplets.
    Retarget,
    /// Train the flow-matching action head.
    TrainFlow,
    /// Tracking error and DTW of the flow head.
    Eval,
    /// Compare training runs and collect evaluation tables.
    Report,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidConfig(_)
        | Error::Validation(_)
        | Error::InvalidRecord { .. }
        | Error::NotPreprocessed(_)
        | Error::UnknownName { .. }
        | Error::DimensionMismatch { .. }
        | Error::EmptyInput(_)
        | Error::KnotOrder { .. }
        | Error::Toml(_)
        | Error::Json(_) => 1,
        Error::File { source, .. } if source.kind() == std::io::ErrorKind::NotFound => 1,
        _ => 2,
    }
}

fn run(cli: &Cli) -> Result<(), Error> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("--config PATH is required".into()))?;
    let cfg = RunConfig::load(path)?.resolve(cli.seed, cli.out.clone(), |k| std::env::var(k).ok())?;
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidConfig(format!("--threads {n}: {e}")))?;
    }
    match cli.command {
        Command::GenSeeds => stages::gen_seeds(&cfg),
        Command::Preprocess => stages::preprocess(&cfg),
        Command::Augment => stages::augment(&cfg),
        Command::TrainManager => stages::train_managers(&cfg),
        Command::Retarget => stages::retarget(&cfg),
        Command::TrainFlow => stages::train_flow_stage(&cfg),
        Command::Eval => stages::eval(&cfg),
        Command::Report => stages::report(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
                    ExitCode::SUCCESS
                }
                _ => ExitCode::from(1),
            };
        }
    };
    logging::init(cli.verbose);
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
