use abn_core::metrics::{energy_report, EnergyConstants};
use abn_core::threshold::{make_policy, AbnParams, PolicyKind};
use anyhow::Result;
use rayon::prelude::*;

use crate::commands::{divergence_message, require_labeled, traced_forward, train_cell, CellOutcome};
use crate::config::{resolved_text, Command, RunConfig};
use crate::dataset::load_labeled;
use crate::report::{format_table, metric, write_artifacts, Artifacts};

struct Row {
    k: (f64, f64, f64),
    outcome: Result<CellOutcome>,
}

pub fn run(cfg: &RunConfig) -> Result<()> {
    let ds = require_labeled(load_labeled(cfg))?;

    // Cells are independent jobs; the result table is assembled in grid
    // order regardless of scheduling.
    let rows: Vec<Row> = cfg
        .sweep_grid
        .par_iter()
        .map(|&(k1, k2, k3)| {
            let params = AbnParams {
                k1,
                k2,
                k3,
                ..cfg.policy.params
            };
            let outcome = make_policy(PolicyKind::Abn, params)
                .map_err(anyhow::Error::from)
                .and_then(|policy| train_cell(cfg, &ds, policy));
            Row {
                k: (k1, k2, k3),
                outcome,
            }
        })
        .collect();

    let mut best: Option<(usize, f64)> = None;
    for (i, row) in rows.iter().enumerate() {
        if let Ok(cell) = &row.outcome {
            if best.map(|(_, acc)| cell.test_accuracy > acc).unwrap_or(true) {
                best = Some((i, cell.test_accuracy));
            }
        }
    }

    let table_rows: Vec<Vec<String>> = rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let (k1, k2, k3) = row.k;
            let mut cells = vec![
                format!("{k1}"),
                format!("{k2}"),
                format!("{k3}"),
            ];
            match &row.outcome {
                Ok(cell) => {
                    cells.push(format!("{:.2}", cell.test_accuracy * 100.0));
                    cells.push(format!("{:.4}", cell.firing.fr_m));
                    cells.push(if best.map(|(b, _)| b == i).unwrap_or(false) {
                        "best".to_string()
                    } else {
                        String::new()
                    });
                }
                Err(e) => {
                    cells.push("-".into());
                    cells.push("-".into());
                    cells.push(divergence_message(e).unwrap_or_else(|| format!("failed: {e}")));
                }
            }
            cells
        })
        .collect();
    let table = format_table(&["K1", "K2", "K3", "acc_%", "f_rate", "note"], &table_rows);

    let mut metrics = Vec::new();
    for row in &rows {
        let (k1, k2, k3) = row.k;
        let tag = format!("k_{k1}_{k2}_{k3}").replace('.', "p");
        match &row.outcome {
            Ok(cell) => {
                metrics.push(metric(&format!("{tag}_accuracy"), cell.test_accuracy, "fraction"));
                metrics.push(metric(&format!("{tag}_fr_m"), cell.firing.fr_m, "spikes_per_step"));
            }
            Err(_) => metrics.push(metric(&format!("{tag}_accuracy"), "nan", "fraction")),
        }
    }

    let (energy, trace) = match best.and_then(|(i, _)| rows[i].outcome.as_ref().ok()) {
        Some(cell) => {
            let constants = EnergyConstants::default();
            let report = energy_report(&cell.test_telemetries, &constants);
            metrics.push(metric("best_accuracy", cell.test_accuracy, "fraction"));
            (
                Some((report, constants)),
                Some(traced_forward(&cell.net, &ds.test[0].0)?),
            )
        }
        None => (None, None),
    };

    write_artifacts(
        &cfg.output_dir,
        &Artifacts {
            resolved_config: resolved_text(cfg, Command::SweepWeights),
            metrics,
            table,
            trace_telemetry: trace,
            energy,
            extra_files: Vec::new(),
        },
    )?;
    Ok(())
}
