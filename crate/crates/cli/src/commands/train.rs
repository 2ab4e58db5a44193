use abn_core::metrics::{energy_report, EnergyConstants};
use abn_core::network::checkpoint;
use anyhow::Result;

use crate::commands::{require_labeled, traced_forward, train_cell};
use crate::config::{build_policy, resolved_text, Command, RunConfig};
use crate::dataset::load_labeled;
use crate::report::{format_table, metric, write_artifacts, Artifacts};

pub fn run(cfg: &RunConfig) -> Result<()> {
    let ds = require_labeled(load_labeled(cfg))?;
    let policy = build_policy(cfg, cfg.policy.kind)?;
    let cell = train_cell(cfg, &ds, policy)?;

    let resolved = resolved_text(cfg, Command::Train);
    checkpoint::save(&cfg.output_dir.join("model.ckpt"), &cell.net, &resolved)
        .map_err(|e| anyhow::anyhow!("saving checkpoint: {e}"))?;

    let rows: Vec<Vec<String>> = cell
        .epoch_log
        .iter()
        .map(|(epoch, loss, acc)| {
            vec![
                epoch.to_string(),
                format!("{loss:.6}"),
                format!("{:.2}", acc * 100.0),
            ]
        })
        .collect();
    let mut table = format_table(&["epoch", "train_loss", "train_acc_%"], &rows);
    table.push_str(&format!(
        "\ntest accuracy: {:.2}%  ({} train / {} test samples)\n",
        cell.test_accuracy * 100.0,
        ds.train.len(),
        ds.test.len()
    ));

    let (final_loss, final_acc) = cell
        .epoch_log
        .last()
        .map(|&(_, l, a)| (l, a))
        .unwrap_or((f64::NAN, 0.0));
    let metrics = vec![
        metric("train_loss_final", final_loss, "nats"),
        metric("train_accuracy_final", final_acc, "fraction"),
        metric("test_accuracy", cell.test_accuracy, "fraction"),
        metric("fr_m", cell.firing.fr_m, "spikes_per_step"),
        metric("fr_m_std", cell.firing.fr_m_std, "spikes_per_step"),
        metric("fr_s_std", cell.firing.fr_s_std, "spikes_per_step"),
    ];

    let constants = EnergyConstants::default();
    let energy = energy_report(&cell.test_telemetries, &constants);
    let trace = traced_forward(&cell.net, &ds.test[0].0)?;

    write_artifacts(
        &cfg.output_dir,
        &Artifacts {
            resolved_config: resolved,
            metrics,
            table,
            trace_telemetry: Some(trace),
            energy: Some((energy, constants)),
            extra_files: Vec::new(),
        },
    )?;
    Ok(())
}
