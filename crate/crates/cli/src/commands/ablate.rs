use abn_core::metrics::{energy_report, EnergyConstants};
use abn_core::threshold::{make_policy, PolicyKind};
use anyhow::Result;
use rayon::prelude::*;

use crate::commands::{divergence_message, require_labeled, traced_forward, train_cell, CellOutcome};
use crate::config::{resolved_text, Command, RunConfig};
use crate::dataset::load_labeled;
use crate::report::{format_table, metric, write_artifacts, Artifacts};

/// The seven component masks, `All` realized as the unmasked rule.
pub const MASKS: [(&str, PolicyKind); 7] = [
    (
        "MG",
        PolicyKind::AbnMasked {
            use_mg: true,
            use_trg: false,
            use_se: false,
        },
    ),
    (
        "TRG",
        PolicyKind::AbnMasked {
            use_mg: false,
            use_trg: true,
            use_se: false,
        },
    ),
    (
        "SE",
        PolicyKind::AbnMasked {
            use_mg: false,
            use_trg: false,
            use_se: true,
        },
    ),
    (
        "MG+TRG",
        PolicyKind::AbnMasked {
            use_mg: true,
            use_trg: true,
            use_se: false,
        },
    ),
    (
        "TRG+SE",
        PolicyKind::AbnMasked {
            use_mg: false,
            use_trg: true,
            use_se: true,
        },
    ),
    (
        "MG+SE",
        PolicyKind::AbnMasked {
            use_mg: true,
            use_trg: false,
            use_se: true,
        },
    ),
    ("All", PolicyKind::Abn),
];

pub fn run(cfg: &RunConfig) -> Result<()> {
    let ds = require_labeled(load_labeled(cfg))?;

    let rows: Vec<(&str, PolicyKind, Result<CellOutcome>)> = MASKS
        .par_iter()
        .map(|&(name, kind)| {
            let outcome = make_policy(kind, cfg.policy.params)
                .map_err(anyhow::Error::from)
                .and_then(|policy| train_cell(cfg, &ds, policy));
            (name, kind, outcome)
        })
        .collect();

    let mut best: Option<(usize, f64)> = None;
    for (i, (_, _, outcome)) in rows.iter().enumerate() {
        if let Ok(cell) = outcome {
            if best.map(|(_, acc)| cell.test_accuracy > acc).unwrap_or(true) {
                best = Some((i, cell.test_accuracy));
            }
        }
    }

    let table_rows: Vec<Vec<String>> = rows
        .iter()
        .enumerate()
        .map(|(i, (name, kind, outcome))| {
            let (k1, k2, k3) = effective_weights(*kind, cfg);
            let mut cells = vec![
                name.to_string(),
                format!("{k1}"),
                format!("{k2}"),
                format!("{k3}"),
            ];
            match outcome {
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
    let table = format_table(
        &["feat", "K1", "K2", "K3", "acc_%", "f_rate", "note"],
        &table_rows,
    );

    let mut metrics = Vec::new();
    for (name, _, outcome) in &rows {
        let tag = name.to_lowercase().replace('+', "_");
        match outcome {
            Ok(cell) => {
                metrics.push(metric(&format!("{tag}_accuracy"), cell.test_accuracy, "fraction"));
                metrics.push(metric(&format!("{tag}_fr_m"), cell.firing.fr_m, "spikes_per_step"));
            }
            Err(_) => metrics.push(metric(&format!("{tag}_accuracy"), "nan", "fraction")),
        }
    }

    let (energy, trace) = match best.and_then(|(i, _)| rows[i].2.as_ref().ok()) {
        Some(cell) => {
            let constants = EnergyConstants::default();
            let report = energy_report(&cell.test_telemetries, &constants);
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
            resolved_config: resolved_text(cfg, Command::AblateComponents),
            metrics,
            table,
            trace_telemetry: trace,
            energy,
            extra_files: Vec::new(),
        },
    )?;
    Ok(())
}

fn effective_weights(kind: PolicyKind, cfg: &RunConfig) -> (f64, f64, f64) {
    let p = &cfg.policy.params;
    match kind {
        PolicyKind::Abn | PolicyKind::Fixed => (p.k1, p.k2, p.k3),
        PolicyKind::AbnMasked {
            use_mg,
            use_trg,
            use_se,
        } => (
            if use_mg { p.k1 } else { 0.0 },
            if use_trg { p.k2 } else { 0.0 },
            if use_se { p.k3 } else { 0.0 },
        ),
    }
}
