//! Run-directory artifacts: fixed-width tables for humans and columnar
//! text for machines. Every writer is deterministic so identical runs
//! produce byte-identical directories.

use std::fmt::Write as _;
use std::path::Path;

use abn_core::metrics::{EnergyConstants, EnergyReport};
use abn_core::network::Telemetry;
use anyhow::Result;

/// `name value unit` lines, one metric per line.
pub fn metrics_tsv(rows: &[(String, String, String)]) -> String {
    let mut s = String::new();
    for (name, value, unit) in rows {
        let _ = writeln!(s, "{name}\t{value}\t{unit}");
    }
    s
}

/// Threshold traces as `step neuron theta`, neuron indices global across
/// layers.
pub fn theta_trace_tsv(telemetry: &Telemetry) -> String {
    let mut s = String::from("step\tneuron\ttheta\n");
    if let Some(traces) = &telemetry.theta_traces {
        for step in 0..telemetry.num_steps {
            let mut offset = 0usize;
            for layer in traces {
                for (j, theta) in layer[step].iter().enumerate() {
                    let _ = writeln!(s, "{step}\t{}\t{theta}", offset + j);
                }
                offset += layer[step].len();
            }
        }
    }
    s
}

/// Per-step per-layer output spike counts.
pub fn spikes_tsv(telemetry: &Telemetry) -> String {
    let mut s = String::from("step\tlayer\tcount\n");
    for step in 0..telemetry.num_steps {
        for (layer, counts) in telemetry.layer_out_spikes.iter().enumerate() {
            let _ = writeln!(s, "{step}\t{layer}\t{}", counts[step]);
        }
    }
    s
}

pub fn energy_tsv(report: &EnergyReport, constants: &EnergyConstants) -> String {
    let mut rows = Vec::new();
    rows.push(("mac_count".into(), report.mac_count.to_string(), "ops".into()));
    rows.push(("ac_count".into(), report.ac_count.to_string(), "ops".into()));
    rows.push((
        "mac_millions".into(),
        format!("{}", report.mac_count as f64 / 1e6),
        "Mops".into(),
    ));
    rows.push((
        "ac_millions".into(),
        format!("{}", report.ac_count as f64 / 1e6),
        "Mops".into(),
    ));
    rows.push(("power".into(), format!("{}", report.power_w), "W".into()));
    rows.push(("e_mac".into(), format!("{}", constants.e_mac_j), "J/op".into()));
    rows.push(("e_ac".into(), format!("{}", constants.e_ac_j), "J/op".into()));
    rows.push(("freq".into(), format!("{}", constants.freq_hz), "1/s".into()));
    metrics_tsv(&rows)
}

/// Fixed-width table with a header row and a separator line.
pub fn format_table(headers: &[&str], rows: &[Vec<String>]) -> String {
    let cols = headers.len();
    let mut widths: Vec<usize> = headers.iter().map(|h| h.len()).collect();
    for row in rows {
        for (i, cell) in row.iter().enumerate().take(cols) {
            widths[i] = widths[i].max(cell.len());
        }
    }
    let mut s = String::new();
    let fmt_row = |cells: &[String], widths: &[usize]| {
        let mut line = String::new();
        for (i, cell) in cells.iter().enumerate() {
            if i > 0 {
                line.push_str("  ");
            }
            let _ = write!(line, "{:<width$}", cell, width = widths[i]);
        }
        line.trim_end().to_string()
    };
    let header_cells: Vec<String> = headers.iter().map(|h| h.to_string()).collect();
    let _ = writeln!(s, "{}", fmt_row(&header_cells, &widths));
    let total: usize = widths.iter().sum::<usize>() + 2 * (cols - 1);
    let _ = writeln!(s, "{}", "-".repeat(total));
    for row in rows {
        let _ = writeln!(s, "{}", fmt_row(row, &widths));
    }
    s
}

/// The standard artifact set every command leaves in its run directory.
pub struct Artifacts {
    pub resolved_config: String,
    pub metrics: Vec<(String, String, String)>,
    pub table: String,
    pub trace_telemetry: Option<Telemetry>,
    pub energy: Option<(EnergyReport, EnergyConstants)>,
    /// Additional command-specific files (name, content).
    pub extra_files: Vec<(String, String)>,
}

pub fn write_artifacts(dir: &Path, artifacts: &Artifacts) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("config.resolved"), &artifacts.resolved_config)?;
    std::fs::write(dir.join("metrics.tsv"), metrics_tsv(&artifacts.metrics))?;
    std::fs::write(dir.join("table.txt"), &artifacts.table)?;
    let (theta, spikes) = match &artifacts.trace_telemetry {
        Some(t) => (theta_trace_tsv(t), spikes_tsv(t)),
        None => (
            String::from("step\tneuron\ttheta\n"),
            String::from("step\tlayer\tcount\n"),
        ),
    };
    std::fs::write(dir.join("theta_trace.tsv"), theta)?;
    std::fs::write(dir.join("spikes.tsv"), spikes)?;
    let energy = match &artifacts.energy {
        Some((report, constants)) => energy_tsv(report, constants),
        None => String::new(),
    };
    std::fs::write(dir.join("energy.tsv"), energy)?;
    for (name, content) in &artifacts.extra_files {
        std::fs::write(dir.join(name), content)?;
    }
    Ok(())
}

/// Shorthand for metric rows.
pub fn metric(name: &str, value: impl std::fmt::Display, unit: &str) -> (String, String, String) {
    (name.to_string(), value.to_string(), unit.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_alignment_is_stable() {
        let t = format_table(
            &["k1", "acc"],
            &[
                vec!["0.25".into(), "94.7".into()],
                vec!["0.5".into(), "61.82".into()],
            ],
        );
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines[0], "k1    acc");
        assert!(lines[1].starts_with("---"));
        assert_eq!(lines[2], "0.25  94.7");
        assert_eq!(lines[3], "0.5   61.82");
    }

    #[test]
    fn metrics_lines_are_name_value_unit() {
        let s = metrics_tsv(&[metric("test_accuracy", 0.5, "fraction")]);
        assert_eq!(s, "test_accuracy\t0.5\tfraction\n");
    }
}
