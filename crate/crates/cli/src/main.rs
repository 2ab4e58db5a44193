use std::path::PathBuf;
use std::process::ExitCode;

use abn_cli::config::{load_config, Command, Overrides};
use abn_cli::run_command;
use abn_core::error::Error as CoreError;
use clap::{Args, Parser, Subcommand};

/// Exit categories: 1 = configuration/validation, 2 = I/O or data decoding,
/// 3 = numeric failure or training divergence.
const EXIT_CONFIG: u8 = 1;
const EXIT_IO: u8 = 2;
const EXIT_NUMERIC: u8 = 3;

#[derive(Parser)]
#[command(name = "abn-snn", about = "Adaptive-threshold spiking network experiments")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args)]
struct Common {
    /// Run configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Override the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the configured output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (0 = automatic).
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train a network and write a checkpoint.
    Train(Common),
    /// Evaluate a checkpoint on the configured dataset.
    Eval(Common),
    /// Train/evaluate across the (k1, k2, k3) grid.
    SweepWeights(Common),
    /// Run the seven component-mask ablation rows.
    AblateComponents(Common),
    /// Fixed vs adaptive firing statistics across stream conditions.
    Homeostasis(Common),
    /// Per-component firing-rate time series on one stream.
    SpikeTrace(Common),
}

impl Cmd {
    fn split(self) -> (Command, Common) {
        match self {
            Cmd::Train(c) => (Command::Train, c),
            Cmd::Eval(c) => (Command::Eval, c),
            Cmd::SweepWeights(c) => (Command::SweepWeights, c),
            Cmd::AblateComponents(c) => (Command::AblateComponents, c),
            Cmd::Homeostasis(c) => (Command::Homeostasis, c),
            Cmd::SpikeTrace(c) => (Command::SpikeTrace, c),
        }
    }
}

fn exit_category(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<CoreError>() {
        Some(CoreError::Io(_))
        | Some(CoreError::TruncatedRecord { .. })
        | Some(CoreError::PixelOutOfRange { .. })
        | Some(CoreError::TimestampOverflow { .. })
        | Some(CoreError::Checkpoint(_)) => EXIT_IO,
        Some(CoreError::NonFiniteInput { .. })
        | Some(CoreError::NonFiniteThreshold { .. })
        | Some(CoreError::TrainingDiverged { .. }) => EXIT_NUMERIC,
        Some(CoreError::Config(_)) | Some(CoreError::Shape(_)) => EXIT_CONFIG,
        None => {
            if err.downcast_ref::<std::io::Error>().is_some() {
                EXIT_IO
            } else {
                EXIT_CONFIG
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, common) = cli.command.split();
    let overrides = Overrides {
        seed: common.seed,
        output_dir: common.out.clone(),
        workers: common.workers,
    };
    let cfg = match load_config(&common.config, &overrides) {
        Ok(cfg) => cfg,
        Err(err) => {
            eprintln!("abn-snn: {err:#}");
            return ExitCode::from(exit_category(&err));
        }
    };
    if cfg.workers > 0 {
        if let Err(err) = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build_global()
        {
            eprintln!("abn-snn: worker pool: {err}");
            return ExitCode::from(EXIT_CONFIG);
        }
    }
    match run_command(command, &cfg) {
        Ok(()) => {
            println!(
                "{}: wrote {}",
                command.name(),
                cfg.output_dir.display()
            );
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("abn-snn: {err:#}");
            ExitCode::from(exit_category(&err))
        }
    }
}
