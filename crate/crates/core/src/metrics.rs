//! Homeostasis statistics over firing-rate telemetry and synaptic-operation
//! energy estimates.
//!
//! Firing rate is spikes per step. Standard deviations are population
//! deviations (divisor = count), which stay defined for single trials.

use crate::error::{Error, Result};
use crate::network::Telemetry;

/// Firing-rate homeostasis metrics over a set of trials.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiringStats {
    /// Mean neuron firing rate over all trials.
    pub fr_m: f64,
    /// Mean over trials of the per-trial std of neuron firing rates.
    pub fr_m_std: f64,
    /// Std over trials of those per-trial stds.
    pub fr_s_std: f64,
}

/// Absolute metric differences between a degraded and a reference run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiringDeltas {
    pub fr_m: f64,
    pub fr_m_std: f64,
    pub fr_s_std: f64,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn population_std(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64).sqrt()
}

/// Compute firing statistics from per-trial per-neuron spike counts.
pub fn firing_stats(per_trial_counts: &[Vec<u32>], num_steps: usize) -> Result<FiringStats> {
    if num_steps == 0 {
        return Err(Error::Config("num_steps must be positive".into()));
    }
    if per_trial_counts.is_empty() || per_trial_counts[0].is_empty() {
        return Err(Error::Config(
            "firing stats need at least one trial and one neuron".into(),
        ));
    }
    let neurons = per_trial_counts[0].len();
    if per_trial_counts.iter().any(|t| t.len() != neurons) {
        return Err(Error::Shape(
            "all trials must cover the same neurons".into(),
        ));
    }
    let mut trial_means = Vec::with_capacity(per_trial_counts.len());
    let mut trial_stds = Vec::with_capacity(per_trial_counts.len());
    for counts in per_trial_counts {
        let rates: Vec<f64> = counts
            .iter()
            .map(|&c| c as f64 / num_steps as f64)
            .collect();
        trial_means.push(mean(&rates));
        trial_stds.push(population_std(&rates));
    }
    Ok(FiringStats {
        fr_m: mean(&trial_means),
        fr_m_std: mean(&trial_stds),
        fr_s_std: population_std(&trial_stds),
    })
}

/// Absolute per-metric differences; symmetric in its arguments.
pub fn compare_runs(reference: &FiringStats, degraded: &FiringStats) -> FiringDeltas {
    FiringDeltas {
        fr_m: (degraded.fr_m - reference.fr_m).abs(),
        fr_m_std: (degraded.fr_m_std - reference.fr_m_std).abs(),
        fr_s_std: (degraded.fr_s_std - reference.fr_s_std).abs(),
    }
}

/// Energy constants: per-operation Joules and inference frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyConstants {
    pub e_mac_j: f64,
    pub e_ac_j: f64,
    pub freq_hz: f64,
}

impl Default for EnergyConstants {
    fn default() -> Self {
        // 45 nm-process figures commonly used for SNN energy accounting.
        EnergyConstants {
            e_mac_j: 4.6e-12,
            e_ac_j: 0.9e-12,
            freq_hz: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyReport {
    /// Dense multiply-accumulate operations (readout stage only).
    pub mac_count: u64,
    /// Spike-driven accumulate operations.
    pub ac_count: u64,
    pub power_w: f64,
}

/// Sum synaptic-operation counts over forward passes: every presynaptic
/// spike costs one accumulate per receiving neuron; the readout argmax is
/// counted as dense multiply-accumulates.
pub fn energy_report(telemetries: &[Telemetry], constants: &EnergyConstants) -> EnergyReport {
    let mut ac_count = 0u64;
    let mut mac_count = 0u64;
    for t in telemetries {
        for (layer, presyn) in t.presyn_spikes.iter().enumerate() {
            let fan_out = t.layer_sizes[layer] as u64;
            for &count in presyn {
                ac_count += count as u64 * fan_out;
            }
        }
        mac_count += t.mac_count;
    }
    let power_w =
        (mac_count as f64 * constants.e_mac_j + ac_count as f64 * constants.e_ac_j)
            * constants.freq_hz;
    EnergyReport {
        mac_count,
        ac_count,
        power_w,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn telemetry(presyn: Vec<Vec<u32>>, sizes: Vec<usize>, mac: u64) -> Telemetry {
        let steps = presyn[0].len();
        Telemetry {
            num_steps: steps,
            layer_sizes: sizes.clone(),
            presyn_spikes: presyn,
            layer_out_spikes: sizes.iter().map(|_| vec![0; steps]).collect(),
            out_counts: sizes.iter().map(|&s| vec![0; s]).collect(),
            ac_count: 0,
            mac_count: mac,
            theta_traces: None,
            spike_trains: None,
        }
    }

    #[test]
    fn saturation_gives_unit_rate_and_zero_spread() {
        let trials = vec![vec![10u32, 10, 10]; 4];
        let s = firing_stats(&trials, 10).unwrap();
        assert_eq!(s.fr_m, 1.0);
        assert_eq!(s.fr_m_std, 0.0);
        assert_eq!(s.fr_s_std, 0.0);
    }

    #[test]
    fn single_trial_hand_statistics() {
        // Rates {0.2, 0.4}: mean 0.3, population std 0.1, no trial spread.
        let trials = vec![vec![2u32, 4]];
        let s = firing_stats(&trials, 10).unwrap();
        assert!((s.fr_m - 0.3).abs() < 1e-12);
        assert!((s.fr_m_std - 0.1).abs() < 1e-12);
        assert_eq!(s.fr_s_std, 0.0);
    }

    #[test]
    fn duplicated_trial_changes_nothing_but_keeps_spread_zero() {
        let one = vec![vec![1u32, 5, 3]];
        let two = vec![vec![1u32, 5, 3], vec![1, 5, 3]];
        let a = firing_stats(&one, 10).unwrap();
        let b = firing_stats(&two, 10).unwrap();
        assert_eq!(a.fr_m, b.fr_m);
        assert_eq!(a.fr_m_std, b.fr_m_std);
        assert_eq!(b.fr_s_std, 0.0);
    }

    #[test]
    fn zero_steps_is_a_configuration_error() {
        assert!(firing_stats(&[vec![1u32]], 0).is_err());
    }

    #[test]
    fn compare_runs_hand_values() {
        let a = FiringStats {
            fr_m: 0.385,
            fr_m_std: 0.253,
            fr_s_std: 0.000891,
        };
        let b = FiringStats {
            fr_m: 0.373,
            fr_m_std: 0.291,
            fr_s_std: 0.000784,
        };
        let d = compare_runs(&a, &b);
        assert!((d.fr_m - 0.012).abs() < 1e-12);
        let d2 = compare_runs(&b, &a);
        assert_eq!(d, d2);
        let zero = compare_runs(&a, &a);
        assert_eq!((zero.fr_m, zero.fr_m_std, zero.fr_s_std), (0.0, 0.0, 0.0));
    }

    #[test]
    fn energy_zero_spikes_is_mac_only() {
        let t = telemetry(vec![vec![0, 0, 0], vec![0, 0, 0]], vec![4, 2], 2);
        let c = EnergyConstants::default();
        let r = energy_report(&[t], &c);
        assert_eq!(r.ac_count, 0);
        assert_eq!(r.mac_count, 2);
        assert!((r.power_w - 2.0 * c.e_mac_j * c.freq_hz).abs() < 1e-24);
    }

    #[test]
    fn one_spike_costs_fan_out_accumulates() {
        let t = telemetry(vec![vec![0, 1, 0]], vec![100], 0);
        let r = energy_report(&[t], &EnergyConstants::default());
        assert_eq!(r.ac_count, 100);
    }

    #[test]
    fn halving_spike_counts_halves_ac_exactly() {
        let full = telemetry(vec![vec![8, 4, 6], vec![2, 10, 4]], vec![7, 3], 0);
        let half = telemetry(vec![vec![4, 2, 3], vec![1, 5, 2]], vec![7, 3], 0);
        let c = EnergyConstants::default();
        assert_eq!(
            energy_report(&[full], &c).ac_count,
            2 * energy_report(&[half], &c).ac_count
        );
    }

    proptest! {
        #[test]
        fn fr_m_stays_in_unit_interval(
            trials in proptest::collection::vec(
                proptest::collection::vec(0u32..=20, 3..6),
                1..5,
            )
        ) {
            // Counts capped at num_steps: binary per-step spiking.
            let num_steps = 20;
            let sized: Vec<Vec<u32>> = trials.iter().map(|t| {
                let mut t = t.clone();
                t.resize(5, 0);
                t
            }).collect();
            let s = firing_stats(&sized, num_steps).unwrap();
            prop_assert!(s.fr_m >= 0.0 && s.fr_m <= 1.0);
        }

        #[test]
        fn stats_are_permutation_invariant(seed in 0u64..1000) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let trials: Vec<Vec<u32>> = (0..4).map(|i| {
                (0..6).map(|j| ((i * 7 + j * 3 + seed as usize) % 11) as u32).collect()
            }).collect();
            let base = firing_stats(&trials, 10).unwrap();

            let mut shuffled = trials.clone();
            shuffled.shuffle(&mut rng);
            for t in shuffled.iter_mut() {
                t.shuffle(&mut rng);
            }
            let perm = firing_stats(&shuffled, 10).unwrap();
            prop_assert!((base.fr_m - perm.fr_m).abs() < 1e-12);
            prop_assert!((base.fr_m_std - perm.fr_m_std).abs() < 1e-12);
            prop_assert!((base.fr_s_std - perm.fr_s_std).abs() < 1e-12);
        }
    }
}
