use abn_core::metrics::{compare_runs, energy_report, EnergyConstants, FiringDeltas, FiringStats};
use abn_core::network::init_network;
use abn_core::threshold::PolicyKind;
use anyhow::{bail, Result};

use crate::commands::{battery_stats, traced_forward};
use crate::config::{build_policy, build_stream_network_config, resolved_text, Command, RunConfig};
use crate::dataset::{build_battery, StreamBattery};
use crate::report::{format_table, metric, write_artifacts, Artifacts};

struct PolicyRow {
    policy: &'static str,
    condition: String,
    stats: FiringStats,
    deltas: FiringDeltas,
}

pub fn run(cfg: &RunConfig) -> Result<()> {
    let reference = build_battery(cfg, None)?;
    let mut batteries: Vec<StreamBattery> = vec![reference];
    for condition in &cfg.homeostasis.conditions {
        batteries.push(build_battery(cfg, Some(*condition))?);
    }
    // Conditions must be step-aligned with the reference.
    let steps = batteries[0].rasters[0].num_steps;
    for b in &batteries {
        if b.rasters.iter().any(|r| r.num_steps != steps) {
            bail!("condition '{}' has mismatched num_steps", b.name);
        }
    }

    let mut rows: Vec<PolicyRow> = Vec::new();
    let mut trace = None;
    let mut energy = None;
    for (policy_name, kind) in [("fixed", PolicyKind::Fixed), ("abn", PolicyKind::Abn)] {
        let policy = build_policy(cfg, kind)?;
        let net_config = build_stream_network_config(cfg, batteries[0].rasters[0].num_neurons, policy)?;
        // Same seed for both policies: identical weights, identical streams.
        let net = init_network(&net_config, cfg.seed)?;
        let mut reference_stats: Option<FiringStats> = None;
        for battery in &batteries {
            let (stats, telemetries) = battery_stats(&net, &battery.rasters)?;
            let deltas = match &reference_stats {
                None => {
                    reference_stats = Some(stats);
                    compare_runs(&stats, &stats)
                }
                Some(r) => compare_runs(r, &stats),
            };
            rows.push(PolicyRow {
                policy: policy_name,
                condition: battery.name.clone(),
                stats,
                deltas,
            });
            if policy_name == "abn" && battery.name == "reference" {
                let constants = EnergyConstants::default();
                energy = Some((energy_report(&telemetries, &constants), constants));
                trace = Some(traced_forward(&net, &battery.rasters[0])?);
            }
        }
    }

    let table_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.policy.to_string(),
                r.condition.clone(),
                format!("{:.4}", r.stats.fr_m),
                format!("{:.4}", r.deltas.fr_m),
                format!("{:.4}", r.stats.fr_m_std),
                format!("{:.4}", r.deltas.fr_m_std),
                format!("{:.6}", r.stats.fr_s_std),
                format!("{:.6}", r.deltas.fr_s_std),
            ]
        })
        .collect();
    let table = format_table(
        &[
            "policy",
            "condition",
            "FR_m",
            "dFR_m",
            "FR_m_std",
            "dFR_m_std",
            "FR_s_std",
            "dFR_s_std",
        ],
        &table_rows,
    );

    let mut metrics = Vec::new();
    for r in &rows {
        let tag = format!("{}_{}", r.policy, r.condition.replace('-', "_"));
        metrics.push(metric(&format!("{tag}_fr_m"), r.stats.fr_m, "spikes_per_step"));
        metrics.push(metric(&format!("{tag}_dfr_m"), r.deltas.fr_m, "spikes_per_step"));
        metrics.push(metric(
            &format!("{tag}_fr_m_std"),
            r.stats.fr_m_std,
            "spikes_per_step",
        ));
        metrics.push(metric(
            &format!("{tag}_dfr_m_std"),
            r.deltas.fr_m_std,
            "spikes_per_step",
        ));
        metrics.push(metric(
            &format!("{tag}_fr_s_std"),
            r.stats.fr_s_std,
            "spikes_per_step",
        ));
        metrics.push(metric(
            &format!("{tag}_dfr_s_std"),
            r.deltas.fr_s_std,
            "spikes_per_step",
        ));
    }

    write_artifacts(
        &cfg.output_dir,
        &Artifacts {
            resolved_config: resolved_text(cfg, Command::Homeostasis),
            metrics,
            table,
            trace_telemetry: trace,
            energy,
            extra_files: Vec::new(),
        },
    )?;
    Ok(())
}
