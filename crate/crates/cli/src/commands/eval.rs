use abn_core::metrics::{energy_report, firing_stats, EnergyConstants};
use abn_core::network::{checkpoint, evaluate, ForwardOpts};
use anyhow::{anyhow, Result};

use crate::commands::{require_labeled, traced_forward};
use crate::config::{resolved_text, Command, RunConfig};
use crate::dataset::load_labeled;
use crate::report::{format_table, metric, write_artifacts, Artifacts};

pub fn run(cfg: &RunConfig) -> Result<()> {
    let ckpt = cfg
        .eval_checkpoint
        .as_ref()
        .ok_or_else(|| anyhow!("eval needs [eval] checkpoint = <path>"))?;
    let (net, _echo) =
        checkpoint::load(ckpt).map_err(|e| anyhow!("loading {}: {e}", ckpt.display()))?;
    let ds = require_labeled(load_labeled(cfg))?;
    if net.input_size() != ds.input_size {
        return Err(anyhow!(
            "checkpoint expects {} inputs, dataset has {}",
            net.input_size(),
            ds.input_size
        ));
    }
    let res = evaluate(&net, &ds.test, &ForwardOpts::default())?;
    let counts: Vec<Vec<u32>> = res.telemetries.iter().map(|t| t.flat_out_counts()).collect();
    let firing = firing_stats(&counts, net.num_steps)?;

    let rows: Vec<Vec<String>> = ds
        .test
        .iter()
        .zip(&res.predictions)
        .enumerate()
        .map(|(i, ((_, label), pred))| {
            vec![
                i.to_string(),
                label.to_string(),
                pred.to_string(),
                if label == pred { "ok" } else { "miss" }.to_string(),
            ]
        })
        .collect();
    let mut table = format_table(&["sample", "label", "prediction", "result"], &rows);
    table.push_str(&format!("\naccuracy: {:.2}%\n", res.accuracy * 100.0));

    let constants = EnergyConstants::default();
    let energy = energy_report(&res.telemetries, &constants);
    let trace = traced_forward(&net, &ds.test[0].0)?;

    write_artifacts(
        &cfg.output_dir,
        &Artifacts {
            resolved_config: resolved_text(cfg, Command::Eval),
            metrics: vec![
                metric("test_accuracy", res.accuracy, "fraction"),
                metric("fr_m", firing.fr_m, "spikes_per_step"),
                metric("fr_m_std", firing.fr_m_std, "spikes_per_step"),
                metric("fr_s_std", firing.fr_s_std, "spikes_per_step"),
            ],
            table,
            trace_telemetry: Some(trace),
            energy: Some((energy, constants)),
            extra_files: Vec::new(),
        },
    )?;
    Ok(())
}
