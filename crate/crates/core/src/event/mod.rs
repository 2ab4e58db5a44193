//! DVS event streams and their conversion to per-neuron spike rasters.
//!
//! Each sensor pixel maps to one input neuron; an event at `(x, y, t)` makes
//! neuron `y * width + x` fire in time bin `floor(t / dt)`. Polarity is kept
//! through decoding (the codec must round-trip) and dropped at conversion.

pub mod nmnist;
pub mod synth;

use crate::error::{Error, Result};

/// A single DVS event. Timestamps are microseconds from stream start.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Event {
    pub x: u16,
    pub y: u16,
    pub t: u32,
    pub polarity: bool,
}

/// A time-ordered event stream with its sensor geometry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventStream {
    pub events: Vec<Event>,
    pub sensor_width: u16,
    pub sensor_height: u16,
    /// Stream length in microseconds, at least the last event timestamp.
    pub duration_us: u64,
    pub label: Option<u32>,
}

impl EventStream {
    pub fn num_pixels(&self) -> usize {
        self.sensor_width as usize * self.sensor_height as usize
    }

    /// Largest event timestamp, or 0 for an empty stream.
    pub fn max_timestamp(&self) -> u64 {
        self.events.iter().map(|e| e.t as u64).max().unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, e) in self.events.iter().enumerate() {
            if e.x >= self.sensor_width || e.y >= self.sensor_height {
                return Err(Error::PixelOutOfRange {
                    record: i,
                    x: e.x,
                    y: e.y,
                    width: self.sensor_width,
                    height: self.sensor_height,
                });
            }
        }
        if self.duration_us < self.max_timestamp() {
            return Err(Error::Config(format!(
                "stream duration {} us is shorter than last event at {} us",
                self.duration_us,
                self.max_timestamp()
            )));
        }
        Ok(())
    }
}

/// Binary per-neuron, per-step spike indicators.
///
/// Stored sparsely (per-step neuron index lists) below 5% density, densely
/// otherwise. Multiple events of one pixel inside one bin collapse to a
/// single spike.
#[derive(Debug, Clone)]
pub struct SpikeRaster {
    pub num_neurons: usize,
    pub num_steps: usize,
    pub dt_us: u64,
    storage: RasterStorage,
}

#[derive(Debug, Clone)]
enum RasterStorage {
    /// Per-step sorted neuron indices.
    Sparse(Vec<Vec<u32>>),
    /// Row-major `[step][neuron]` flags.
    Dense(Vec<bool>),
}

const DENSE_THRESHOLD: f64 = 0.05;

impl SpikeRaster {
    /// Build a raster from (neuron, step) pairs; duplicates collapse.
    pub fn from_spikes(
        num_neurons: usize,
        num_steps: usize,
        dt_us: u64,
        spikes: impl IntoIterator<Item = (u32, usize)>,
    ) -> Self {
        let mut per_step: Vec<Vec<u32>> = vec![Vec::new(); num_steps];
        for (neuron, step) in spikes {
            debug_assert!((neuron as usize) < num_neurons && step < num_steps);
            per_step[step].push(neuron);
        }
        let mut total = 0usize;
        for bin in per_step.iter_mut() {
            bin.sort_unstable();
            bin.dedup();
            total += bin.len();
        }
        let density = if num_neurons * num_steps == 0 {
            0.0
        } else {
            total as f64 / (num_neurons * num_steps) as f64
        };
        let storage = if density < DENSE_THRESHOLD {
            RasterStorage::Sparse(per_step)
        } else {
            let mut flags = vec![false; num_neurons * num_steps];
            for (step, bin) in per_step.iter().enumerate() {
                for &n in bin {
                    flags[step * num_neurons + n as usize] = true;
                }
            }
            RasterStorage::Dense(flags)
        };
        SpikeRaster {
            num_neurons,
            num_steps,
            dt_us,
            storage,
        }
    }

    /// Indices of neurons that spike in `step`, ascending.
    pub fn neurons_at(&self, step: usize) -> Vec<u32> {
        match &self.storage {
            RasterStorage::Sparse(bins) => bins.get(step).cloned().unwrap_or_default(),
            RasterStorage::Dense(flags) => {
                if step >= self.num_steps {
                    return Vec::new();
                }
                (0..self.num_neurons)
                    .filter(|&n| flags[step * self.num_neurons + n])
                    .map(|n| n as u32)
                    .collect()
            }
        }
    }

    pub fn is_set(&self, neuron: usize, step: usize) -> bool {
        match &self.storage {
            RasterStorage::Sparse(bins) => bins[step].binary_search(&(neuron as u32)).is_ok(),
            RasterStorage::Dense(flags) => flags[step * self.num_neurons + neuron],
        }
    }

    pub fn total_spikes(&self) -> usize {
        match &self.storage {
            RasterStorage::Sparse(bins) => bins.iter().map(|b| b.len()).sum(),
            RasterStorage::Dense(flags) => flags.iter().filter(|&&f| f).count(),
        }
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self.storage, RasterStorage::Sparse(_))
    }
}

/// Convert an event stream into a spike raster with time bin `dt_us`.
///
/// Neuron index is `y * width + x`; the event's polarity is ignored. The
/// raster spans `ceil(duration / dt)` steps, extended by one if an event
/// falls exactly on the final bin boundary.
pub fn events_to_spikes(stream: &EventStream, dt_us: u64) -> Result<SpikeRaster> {
    if dt_us == 0 {
        return Err(Error::Config("raster dt must be positive".into()));
    }
    stream.validate()?;
    let width = stream.sensor_width as u32;
    let from_duration = stream.duration_us.div_ceil(dt_us) as usize;
    let last_bin = if stream.events.is_empty() {
        0
    } else {
        (stream.max_timestamp() / dt_us) as usize + 1
    };
    let num_steps = from_duration.max(last_bin);
    let spikes = stream.events.iter().map(|e| {
        let neuron = e.y as u32 * width + e.x as u32;
        let step = (e.t as u64 / dt_us) as usize;
        (neuron, step)
    });
    Ok(SpikeRaster::from_spikes(
        stream.num_pixels(),
        num_steps,
        dt_us,
        spikes,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stream(events: Vec<Event>, width: u16, height: u16, duration_us: u64) -> EventStream {
        EventStream {
            events,
            sensor_width: width,
            sensor_height: height,
            duration_us,
            label: None,
        }
    }

    #[test]
    fn single_event_maps_to_row_major_neuron_and_bin() {
        let s = stream(
            vec![Event {
                x: 3,
                y: 4,
                t: 1000,
                polarity: true,
            }],
            34,
            34,
            1000,
        );
        let r = events_to_spikes(&s, 1000).unwrap();
        assert!(r.is_set(139, 1)); // 4 * 34 + 3
        assert_eq!(r.total_spikes(), 1);
    }

    #[test]
    fn same_pixel_same_bin_collapses() {
        let s = stream(
            vec![
                Event {
                    x: 0,
                    y: 0,
                    t: 100,
                    polarity: true,
                },
                Event {
                    x: 0,
                    y: 0,
                    t: 900,
                    polarity: false,
                },
            ],
            2,
            2,
            1000,
        );
        let r = events_to_spikes(&s, 1000).unwrap();
        assert_eq!(r.total_spikes(), 1);
        assert!(r.is_set(0, 0));
    }

    #[test]
    fn distinct_pixels_same_bin_stay_distinct() {
        let s = stream(
            vec![
                Event {
                    x: 0,
                    y: 0,
                    t: 500,
                    polarity: true,
                },
                Event {
                    x: 1,
                    y: 0,
                    t: 500,
                    polarity: true,
                },
            ],
            2,
            1,
            1000,
        );
        let r = events_to_spikes(&s, 1000).unwrap();
        assert_eq!(r.total_spikes(), 2);
        assert!(r.is_set(0, 0));
        assert!(r.is_set(1, 0));
    }

    #[test]
    fn polarity_flip_yields_identical_raster() {
        let mut events = Vec::new();
        for i in 0..20u32 {
            events.push(Event {
                x: (i % 5) as u16,
                y: (i / 5) as u16,
                t: i * 137,
                polarity: i % 2 == 0,
            });
        }
        let base = stream(events.clone(), 5, 5, 3000);
        let flipped = stream(
            events
                .iter()
                .map(|e| Event {
                    polarity: !e.polarity,
                    ..*e
                })
                .collect(),
            5,
            5,
            3000,
        );
        let a = events_to_spikes(&base, 500).unwrap();
        let b = events_to_spikes(&flipped, 500).unwrap();
        assert_eq!(a.total_spikes(), b.total_spikes());
        for step in 0..a.num_steps {
            assert_eq!(a.neurons_at(step), b.neurons_at(step));
        }
    }

    #[test]
    fn zero_dt_rejected() {
        let s = stream(vec![], 2, 2, 100);
        assert!(events_to_spikes(&s, 0).is_err());
    }

    #[test]
    fn dense_storage_kicks_in_above_threshold() {
        // 2x2 sensor, every pixel fires every bin: density 1.0.
        let mut events = Vec::new();
        for t in 0..4u32 {
            for p in 0..4u16 {
                events.push(Event {
                    x: p % 2,
                    y: p / 2,
                    t: t * 10,
                    polarity: true,
                });
            }
        }
        let s = stream(events, 2, 2, 40);
        let r = events_to_spikes(&s, 10).unwrap();
        assert!(!r.is_sparse());
        assert_eq!(r.total_spikes(), 16);
        for step in 0..4 {
            assert_eq!(r.neurons_at(step), vec![0, 1, 2, 3]);
            for n in 0..4 {
                assert!(r.is_set(n, step));
            }
        }
    }
}
