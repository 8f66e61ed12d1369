use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use log::{error, LevelFilter};
use timetk_cli::run::{exit_code, EXIT_OTHER};
use timetk_cli::{run, Command, ExperimentConfig};
use timetk_core::{Error, Variant};

#[derive(Parser)]
#[command(name = "timetk", version, about = "Multivariate time-series forecasting experiments")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// Experiment config (TOML). Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory, overriding `output_dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Seed for data synthesis, model init and training order.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Run a single forecast horizon.
    #[arg(long, global = true)]
    horizon: Option<usize>,

    /// Model variant, e.g. `full`, `no-mote`, `kan-to-mlp`.
    #[arg(long, global = true)]
    variant: Option<Variant>,

    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Train and test one variant per horizon, saving checkpoints.
    Train,
    /// Score saved checkpoints on the test split.
    Eval,
    /// Train every variant over several seeds and tabulate.
    Ablate,
    /// Finite-difference gradient check of every variant.
    Gradcheck,
    /// Write the synthetic datasets as CSV.
    Synth,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Train => Command::Train,
            Cmd::Eval => Command::Eval,
            Cmd::Ablate => Command::Ablate,
            Cmd::Gradcheck => Command::Gradcheck,
            Cmd::Synth => Command::Synth,
        }
    }
}

fn load_config(cli: &Cli) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path).with_context(|| format!("loading {}", path.display()))?,
        None => ExperimentConfig::default(),
    };
    cfg.apply_overrides(cli.out.clone(), cli.seed, cli.horizon, cli.variant);
    Ok(cfg)
}

fn code_of(err: &anyhow::Error) -> u8 {
    err.downcast_ref::<Error>().map_or(EXIT_OTHER, exit_code) as u8
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => LevelFilter::Warn,
        1 => LevelFilter::Info,
        _ => LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).init();

    let result = load_config(&cli).and_then(|cfg| Ok(run(cli.command.into(), &cfg)?));
    match result {
        Ok(outcome) => {
            println!("{}", outcome.artifact.display());
            if !outcome.passed {
                error!("gradient check failed; see {}", outcome.artifact.display());
            }
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(err) => {
            error!("{err:#}");
            eprintln!("error: {err:#}");
            ExitCode::from(code_of(&err))
        }
    }
}
