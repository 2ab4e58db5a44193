//! Command implementations. Each command resolves its config, runs, and
//! leaves the standard artifact set in the output directory.

pub mod ablate;
pub mod eval;
pub mod homeostasis;
pub mod spike_trace;
pub mod sweep;
pub mod train;

use abn_core::error::Error as CoreError;
use abn_core::event::SpikeRaster;
use abn_core::metrics::{firing_stats, FiringStats};
use abn_core::network::train::{train_epoch, TrainConfig as CoreTrainConfig, Loss};
use abn_core::network::{evaluate, init_network, ForwardOpts, Network, Telemetry};
use abn_core::threshold::ThresholdPolicy;
use anyhow::{anyhow, Result};

use crate::config::{build_network_config, RunConfig};
use crate::dataset::LabeledDataset;

pub(crate) fn core_train_config(cfg: &RunConfig) -> CoreTrainConfig {
    CoreTrainConfig {
        learning_rate: cfg.train.learning_rate,
        epochs: cfg.train.epochs,
        batch_size: cfg.train.batch_size,
        surrogate_width: cfg.train.surrogate_width,
        loss: Loss::CrossEntropyOnRates,
    }
}

pub(crate) struct CellOutcome {
    pub net: Network,
    pub epoch_log: Vec<(usize, f64, f64)>,
    pub test_accuracy: f64,
    pub firing: FiringStats,
    pub test_telemetries: Vec<Telemetry>,
}

/// Train a fresh network under the given policy and evaluate it on the test
/// split. A training divergence surfaces as `Err`; sweep-style callers
/// record it per row instead of aborting.
pub(crate) fn train_cell(
    cfg: &RunConfig,
    ds: &LabeledDataset,
    policy: ThresholdPolicy,
) -> Result<CellOutcome> {
    let net_config = build_network_config(cfg, ds.input_size, ds.num_classes, policy)?;
    let mut net = init_network(&net_config, cfg.seed)?;
    let train_cfg = core_train_config(cfg);
    let mut epoch_log = Vec::with_capacity(train_cfg.epochs);
    for epoch in 0..train_cfg.epochs {
        let (loss, acc) = train_epoch(&mut net, &ds.train, &train_cfg, epoch)?;
        epoch_log.push((epoch, loss, acc));
    }
    let eval_res = evaluate(&net, &ds.test, &ForwardOpts::default())?;
    let counts: Vec<Vec<u32>> = eval_res
        .telemetries
        .iter()
        .map(|t| t.flat_out_counts())
        .collect();
    let firing = firing_stats(&counts, net.num_steps)?;
    Ok(CellOutcome {
        net,
        epoch_log,
        test_accuracy: eval_res.accuracy,
        firing,
        test_telemetries: eval_res.telemetries,
    })
}

/// Forward a raster with threshold traces and spike trains recorded, for
/// the designated trace sample of a run directory.
pub(crate) fn traced_forward(net: &Network, raster: &SpikeRaster) -> Result<Telemetry> {
    let opts = ForwardOpts {
        record_theta: true,
        record_trains: true,
        ..Default::default()
    };
    Ok(net.forward(raster, &opts)?.telemetry)
}

/// Forward a battery of rasters and reduce to firing statistics over all
/// simulated neurons, one trial per raster.
pub(crate) fn battery_stats(
    net: &Network,
    rasters: &[SpikeRaster],
) -> Result<(FiringStats, Vec<Telemetry>)> {
    use rayon::prelude::*;
    let outs: Vec<std::result::Result<_, CoreError>> = rasters
        .par_iter()
        .map(|r| net.forward(r, &ForwardOpts::default()))
        .collect();
    let mut telemetries = Vec::with_capacity(rasters.len());
    for out in outs {
        telemetries.push(out?.telemetry);
    }
    let counts: Vec<Vec<u32>> = telemetries.iter().map(|t| t.flat_out_counts()).collect();
    let stats = firing_stats(&counts, net.num_steps)?;
    Ok((stats, telemetries))
}

/// Divergence is reported in-row by sweep-style commands.
pub(crate) fn divergence_message(err: &anyhow::Error) -> Option<String> {
    match err.downcast_ref::<CoreError>() {
        Some(CoreError::TrainingDiverged { epoch, batch }) => {
            Some(format!("diverged at epoch {epoch}, batch {batch}"))
        }
        _ => None,
    }
}

pub(crate) fn require_labeled(ds: Result<LabeledDataset>) -> Result<LabeledDataset> {
    ds.map_err(|e| anyhow!("{e}"))
}
