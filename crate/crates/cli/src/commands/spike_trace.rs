use std::fmt::Write as _;

use abn_core::metrics::{energy_report, EnergyConstants};
use abn_core::network::{init_network, ForwardOpts, Telemetry};
use abn_core::threshold::PolicyKind;
use anyhow::Result;

use crate::config::{build_policy, build_stream_network_config, resolved_text, Command, RunConfig};
use crate::dataset::build_battery;
use crate::report::{format_table, metric, write_artifacts, Artifacts};

const COMPONENT_RUNS: [(&str, PolicyKind); 4] = [
    ("fixed", PolicyKind::Fixed),
    (
        "mg",
        PolicyKind::AbnMasked {
            use_mg: true,
            use_trg: false,
            use_se: false,
        },
    ),
    (
        "trg",
        PolicyKind::AbnMasked {
            use_mg: false,
            use_trg: true,
            use_se: false,
        },
    ),
    (
        "se",
        PolicyKind::AbnMasked {
            use_mg: false,
            use_trg: false,
            use_se: true,
        },
    ),
];

/// Per-step network firing rate: spikes across simulated neurons divided by
/// neuron count.
pub fn firing_series(telemetry: &Telemetry) -> Vec<f64> {
    let total_neurons: usize = telemetry.layer_sizes.iter().sum();
    (0..telemetry.num_steps)
        .map(|t| {
            let spikes: u32 = telemetry
                .layer_out_spikes
                .iter()
                .map(|layer| layer[t])
                .sum();
            spikes as f64 / total_neurons as f64
        })
        .collect()
}

fn series_file(series: &[f64]) -> String {
    let mut s = String::from("step\trate\n");
    for (step, rate) in series.iter().enumerate() {
        let _ = writeln!(s, "{step}\t{rate}");
    }
    s
}

pub fn run(cfg: &RunConfig) -> Result<()> {
    // All component runs see the identical stream (trial 0 of the battery).
    let battery = build_battery(cfg, None)?;
    let raster = &battery.rasters[0];

    let mut extra_files = Vec::new();
    let mut table_rows = Vec::new();
    let mut metrics = Vec::new();
    let mut trace = None;
    let mut energy = None;

    for (name, kind) in COMPONENT_RUNS {
        let policy = build_policy(cfg, kind)?;
        let net_config = build_stream_network_config(cfg, raster.num_neurons, policy)?;
        let net = init_network(&net_config, cfg.seed)?;
        let opts = ForwardOpts {
            record_theta: true,
            record_trains: true,
            ..Default::default()
        };
        let out = net.forward(raster, &opts)?;
        let series = firing_series(&out.telemetry);
        let late_start = series.len() * 2 / 3;
        let late_mean = if series.len() > late_start {
            series[late_start..].iter().sum::<f64>() / (series.len() - late_start) as f64
        } else {
            0.0
        };
        let overall = series.iter().sum::<f64>() / series.len().max(1) as f64;
        table_rows.push(vec![
            name.to_string(),
            format!("{overall:.4}"),
            format!("{late_mean:.4}"),
        ]);
        metrics.push(metric(&format!("{name}_mean_rate"), overall, "spikes_per_step"));
        metrics.push(metric(
            &format!("{name}_late_mean_rate"),
            late_mean,
            "spikes_per_step",
        ));
        extra_files.push((format!("series_{name}.tsv"), series_file(&series)));
        if name == "mg" {
            let constants = EnergyConstants::default();
            energy = Some((energy_report(&[out.telemetry.clone()], &constants), constants));
            trace = Some(out.telemetry);
        }
    }

    let table = format_table(&["component", "mean_rate", "late_mean_rate"], &table_rows);
    write_artifacts(
        &cfg.output_dir,
        &Artifacts {
            resolved_config: resolved_text(cfg, Command::SpikeTrace),
            metrics,
            table,
            trace_telemetry: trace,
            energy,
            extra_files,
        },
    )?;
    Ok(())
}
