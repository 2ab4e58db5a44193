//! Experiment runner library behind the `abn-snn` binary. Exposed so
//! integration tests can drive commands in-process.

pub mod commands;
pub mod config;
pub mod dataset;
pub mod report;

use anyhow::Result;

use config::{Command, RunConfig};

pub fn run_command(command: Command, cfg: &RunConfig) -> Result<()> {
    std::fs::create_dir_all(&cfg.output_dir)?;
    match command {
        Command::Train => commands::train::run(cfg),
        Command::Eval => commands::eval::run(cfg),
        Command::SweepWeights => commands::sweep::run(cfg),
        Command::AblateComponents => commands::ablate::run(cfg),
        Command::Homeostasis => commands::homeostasis::run(cfg),
        Command::SpikeTrace => commands::spike_trace::run(cfg),
    }
}
