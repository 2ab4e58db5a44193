//! Dataset assembly: N-MNIST directories, in-memory digit workloads, and
//! synthetic stream batteries for the homeostasis and trace commands.

use std::path::Path;

use abn_core::event::synth::{synth_burst, synth_digit, synth_poisson, DigitParams};
use abn_core::event::{events_to_spikes, nmnist, EventStream, SpikeRaster};
use anyhow::{bail, Context, Result};

use crate::config::{Condition, DatasetKind, RunConfig};

pub struct LabeledDataset {
    pub train: Vec<(SpikeRaster, u32)>,
    pub test: Vec<(SpikeRaster, u32)>,
    pub input_size: usize,
    pub num_classes: usize,
}

fn mix_seed(base: u64, stream: u64, index: u64) -> u64 {
    base.wrapping_mul(0x9e3779b97f4a7c15)
        .wrapping_add(stream.wrapping_mul(0x517cc1b727220a95))
        .wrapping_add(index)
}

/// Load the labeled dataset named by the config. Poisson/burst kinds carry
/// no labels and are rejected here.
pub fn load_labeled(cfg: &RunConfig) -> Result<LabeledDataset> {
    let dt_us = crate::config::raster_dt_us(cfg);
    match &cfg.dataset {
        DatasetKind::Digits {
            train_per_class,
            test_per_class,
            duration_us,
            on_rate_hz,
            noise_rate_hz,
            jitter_px,
        } => {
            let params = DigitParams {
                duration_us: *duration_us,
                on_rate_hz: *on_rate_hz,
                noise_rate_hz: *noise_rate_hz,
                jitter_px: *jitter_px,
                ..DigitParams::default()
            };
            let gen = |per_class: usize, split: u64| -> Result<Vec<(SpikeRaster, u32)>> {
                let mut out = Vec::new();
                for class in 0..10u32 {
                    for idx in 0..per_class {
                        let seed =
                            mix_seed(cfg.seed, split * 10 + class as u64, idx as u64);
                        let stream = synth_digit(class, &params, seed)?;
                        out.push((events_to_spikes(&stream, dt_us)?, class));
                    }
                }
                Ok(out)
            };
            Ok(LabeledDataset {
                train: gen(*train_per_class, 0)?,
                test: gen(*test_per_class, 1)?,
                input_size: params.sensor_width as usize * params.sensor_height as usize,
                num_classes: 10,
            })
        }
        DatasetKind::Nmnist { path, preset } => {
            let per_class = preset.per_class();
            let train = load_nmnist_split(&path.join("Train"), per_class.map(|p| p.0), dt_us)?;
            let test = load_nmnist_split(&path.join("Test"), per_class.map(|p| p.1), dt_us)?;
            if train.is_empty() || test.is_empty() {
                bail!("dataset at {} has an empty split", path.display());
            }
            let num_classes = train
                .iter()
                .chain(&test)
                .map(|(_, l)| l + 1)
                .max()
                .unwrap() as usize;
            Ok(LabeledDataset {
                train,
                test,
                input_size: nmnist::SENSOR_WIDTH as usize * nmnist::SENSOR_HEIGHT as usize,
                num_classes,
            })
        }
        DatasetKind::Poisson { .. } | DatasetKind::Burst { .. } => {
            bail!("this command needs a labeled dataset (nmnist or digits)")
        }
    }
}

/// Read a directory-per-class split, taking the first `per_class` samples
/// per class in sorted filename order when a preset limits the count.
fn load_nmnist_split(
    dir: &Path,
    per_class: Option<usize>,
    dt_us: u64,
) -> Result<Vec<(SpikeRaster, u32)>> {
    let mut class_dirs: Vec<(u32, std::path::PathBuf)> = Vec::new();
    for entry in std::fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
        let entry = entry?;
        if !entry.file_type()?.is_dir() {
            continue;
        }
        let name = entry.file_name().to_string_lossy().to_string();
        let label: u32 = name
            .parse()
            .with_context(|| format!("class directory '{name}' is not a number"))?;
        class_dirs.push((label, entry.path()));
    }
    class_dirs.sort_by_key(|(label, _)| *label);
    let mut samples = Vec::new();
    for (label, class_dir) in class_dirs {
        let mut files: Vec<std::path::PathBuf> = std::fs::read_dir(&class_dir)?
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.is_file())
            .collect();
        files.sort();
        if let Some(limit) = per_class {
            if files.len() < limit {
                bail!(
                    "class {} has {} samples, preset needs {}",
                    label,
                    files.len(),
                    limit
                );
            }
            files.truncate(limit);
        }
        for file in files {
            let stream = nmnist::read_sample(&file, Some(label))?;
            samples.push((events_to_spikes(&stream, dt_us)?, label));
        }
    }
    Ok(samples)
}

/// Write a digit workload to disk in the N-MNIST binary layout
/// (`Train/<class>/NNNNN.bin`, `Test/<class>/NNNNN.bin`).
pub fn materialize_digits_as_nmnist(
    dir: &Path,
    train_per_class: usize,
    test_per_class: usize,
    params: &DigitParams,
    seed: u64,
) -> Result<()> {
    for (split, per_class, split_id) in [
        ("Train", train_per_class, 0u64),
        ("Test", test_per_class, 1u64),
    ] {
        for class in 0..10u32 {
            let class_dir = dir.join(split).join(class.to_string());
            std::fs::create_dir_all(&class_dir)?;
            for idx in 0..per_class {
                let sample_seed = mix_seed(seed, split_id * 10 + class as u64, idx as u64);
                let stream = synth_digit(class, params, sample_seed)?;
                nmnist::write_sample(&class_dir.join(format!("{idx:05}.bin")), &stream)?;
            }
        }
    }
    Ok(())
}

/// One homeostasis workload: named condition plus its per-trial streams.
pub struct StreamBattery {
    pub name: String,
    pub rasters: Vec<SpikeRaster>,
}

fn stream_for(
    cfg: &RunConfig,
    condition: Option<Condition>,
    trial: usize,
) -> Result<EventStream> {
    let seed = mix_seed(cfg.seed, 7, trial as u64);
    match &cfg.dataset {
        DatasetKind::Poisson {
            num_neurons,
            rate_hz,
            duration_us,
            ..
        } => {
            let stream = match condition {
                None => synth_poisson(*rate_hz, *num_neurons, *duration_us, seed)?,
                Some(Condition::RateDoubled) => {
                    synth_poisson(rate_hz * 2.0, *num_neurons, *duration_us, seed)?
                }
                Some(Condition::Sparse) => {
                    synth_poisson(rate_hz / 4.0, *num_neurons, *duration_us, seed)?
                }
                Some(Condition::Burst) => {
                    // Mid-stream window at eight times the base rate.
                    let windows = [(duration_us * 2 / 5, duration_us * 3 / 5)];
                    synth_burst(
                        *rate_hz,
                        rate_hz * 8.0,
                        &windows,
                        *num_neurons,
                        *duration_us,
                        seed,
                    )?
                }
            };
            Ok(stream)
        }
        DatasetKind::Burst {
            num_neurons,
            base_rate_hz,
            burst_rate_hz,
            burst_windows,
            duration_us,
            ..
        } => {
            if condition.is_some() {
                bail!("homeostasis conditions require dataset kind = poisson");
            }
            Ok(synth_burst(
                *base_rate_hz,
                *burst_rate_hz,
                burst_windows,
                *num_neurons,
                *duration_us,
                seed,
            )?)
        }
        _ => bail!("this command needs a synthetic stream dataset (poisson or burst)"),
    }
}

pub fn stream_trials(cfg: &RunConfig) -> Result<usize> {
    match &cfg.dataset {
        DatasetKind::Poisson { trials, .. } | DatasetKind::Burst { trials, .. } => Ok(*trials),
        _ => bail!("this command needs a synthetic stream dataset (poisson or burst)"),
    }
}

pub fn stream_input_size(cfg: &RunConfig) -> Result<usize> {
    match &cfg.dataset {
        DatasetKind::Poisson { num_neurons, .. } | DatasetKind::Burst { num_neurons, .. } => {
            Ok(*num_neurons as usize)
        }
        _ => bail!("this command needs a synthetic stream dataset (poisson or burst)"),
    }
}

/// Build the reference battery (condition `None`) or a degraded battery.
pub fn build_battery(cfg: &RunConfig, condition: Option<Condition>) -> Result<StreamBattery> {
    let dt_us = crate::config::raster_dt_us(cfg);
    let trials = stream_trials(cfg)?;
    let mut rasters = Vec::with_capacity(trials);
    for trial in 0..trials {
        let stream = stream_for(cfg, condition, trial)?;
        rasters.push(events_to_spikes(&stream, dt_us)?);
    }
    Ok(StreamBattery {
        name: condition.map(|c| c.name().to_string()).unwrap_or_else(|| "reference".into()),
        rasters,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{parse_config, Overrides};

    #[test]
    fn digit_dataset_is_deterministic_and_labeled() {
        let text = "[run]\nseed = 5\n[dataset]\nkind = digits\ntrain_per_class = 2\ntest_per_class = 1\n";
        let cfg = parse_config(text, &Overrides::default()).unwrap();
        let a = load_labeled(&cfg).unwrap();
        let b = load_labeled(&cfg).unwrap();
        assert_eq!(a.train.len(), 20);
        assert_eq!(a.test.len(), 10);
        assert_eq!(a.input_size, 34 * 34);
        for ((ra, la), (rb, lb)) in a.train.iter().zip(&b.train) {
            assert_eq!(la, lb);
            assert_eq!(ra.total_spikes(), rb.total_spikes());
        }
    }

    #[test]
    fn materialized_digits_load_back_through_the_codec() {
        let dir = tempfile::tempdir().unwrap();
        let params = DigitParams::default();
        materialize_digits_as_nmnist(dir.path(), 2, 1, &params, 9).unwrap();
        let text = format!(
            "[run]\nseed = 9\n[dataset]\nkind = nmnist\npath = {}\npreset = all\n",
            dir.path().display()
        );
        let cfg = parse_config(&text, &Overrides::default()).unwrap();
        let ds = load_labeled(&cfg).unwrap();
        assert_eq!(ds.train.len(), 20);
        assert_eq!(ds.test.len(), 10);
        assert_eq!(ds.num_classes, 10);
    }

    #[test]
    fn batteries_share_streams_across_policies() {
        let text = "[run]\nseed = 3\n[dataset]\nkind = poisson\nnum_neurons = 8\ntrials = 3\n";
        let cfg = parse_config(text, &Overrides::default()).unwrap();
        let a = build_battery(&cfg, None).unwrap();
        let b = build_battery(&cfg, None).unwrap();
        for (ra, rb) in a.rasters.iter().zip(&b.rasters) {
            assert_eq!(ra.total_spikes(), rb.total_spikes());
        }
        let degraded = build_battery(&cfg, Some(Condition::RateDoubled)).unwrap();
        assert_eq!(degraded.name, "rate-doubled");
        assert!(degraded.rasters[0].total_spikes() > a.rasters[0].total_spikes());
    }
}
