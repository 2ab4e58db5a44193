//! Deterministic synthetic event streams: homogeneous Poisson, windowed
//! bursts, and labeled digit-glyph workloads for desk-scale training runs.

use std::io::{BufRead, Write};
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::event::{Event, EventStream};

/// Homogeneous Poisson stream: every neuron fires independently at
/// `rate_hz`. Neurons lie on a `num_neurons x 1` sensor, so neuron index
/// equals the x coordinate.
pub fn synth_poisson(
    rate_hz: f64,
    num_neurons: u16,
    duration_us: u64,
    seed: u64,
) -> Result<EventStream> {
    synth_burst(rate_hz, rate_hz, &[], num_neurons, duration_us, seed)
}

/// Piecewise-constant-rate Poisson stream: `burst_rate_hz` inside the given
/// `[start_us, end_us)` windows, `base_rate_hz` outside. Windows must be
/// sorted, non-overlapping, and inside `[0, duration_us]`.
pub fn synth_burst(
    base_rate_hz: f64,
    burst_rate_hz: f64,
    burst_windows: &[(u64, u64)],
    num_neurons: u16,
    duration_us: u64,
    seed: u64,
) -> Result<EventStream> {
    if base_rate_hz < 0.0 || burst_rate_hz < base_rate_hz {
        return Err(Error::Config(format!(
            "rates must satisfy 0 <= base ({base_rate_hz}) <= burst ({burst_rate_hz})"
        )));
    }
    if duration_us == 0 {
        return Err(Error::Config("stream duration must be positive".into()));
    }
    let mut prev_end = 0u64;
    for &(start, end) in burst_windows {
        if start >= end || end > duration_us {
            return Err(Error::Config(format!(
                "burst window [{start}, {end}) outside stream of {duration_us} us"
            )));
        }
        if start < prev_end {
            return Err(Error::Config(format!(
                "burst window [{start}, {end}) overlaps or is unsorted"
            )));
        }
        prev_end = end;
    }

    // Split [0, duration) into segments of constant rate.
    let mut segments: Vec<(u64, u64, f64)> = Vec::new();
    let mut cursor = 0u64;
    for &(start, end) in burst_windows {
        if cursor < start {
            segments.push((cursor, start, base_rate_hz));
        }
        segments.push((start, end, burst_rate_hz));
        cursor = end;
    }
    if cursor < duration_us {
        segments.push((cursor, duration_us, base_rate_hz));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut events = Vec::new();
    for neuron in 0..num_neurons {
        for &(seg_start, seg_end, rate) in &segments {
            if rate <= 0.0 {
                continue;
            }
            // Exponential inter-arrival times; restricting a Poisson process
            // to disjoint segments gives independent processes per segment.
            let mut t = seg_start as f64;
            loop {
                let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
                t += -u.ln() / rate * 1e6;
                if t >= seg_end as f64 {
                    break;
                }
                events.push(Event {
                    x: neuron,
                    y: 0,
                    t: t as u32,
                    polarity: rng.gen(),
                });
            }
        }
    }
    events.sort_by_key(|e| (e.t, e.x, e.polarity));
    Ok(EventStream {
        events,
        sensor_width: num_neurons,
        sensor_height: 1,
        duration_us,
        label: None,
    })
}

const GLYPH_COLS: usize = 12;
const GLYPH_ROWS: usize = 20;

/// Seven-segment digit masks on a 12x20 grid.
///
/// Segment order: top, top-right, bottom-right, bottom, bottom-left,
/// top-left, middle.
const DIGIT_SEGMENTS: [[bool; 7]; 10] = [
    [true, true, true, true, true, true, false],     // 0
    [false, true, true, false, false, false, false], // 1
    [true, true, false, true, true, false, true],    // 2
    [true, true, true, true, false, false, true],    // 3
    [false, true, true, false, false, true, true],   // 4
    [true, false, true, true, false, true, true],    // 5
    [true, false, true, true, true, true, true],     // 6
    [true, true, true, false, false, false, false],  // 7
    [true, true, true, true, true, true, true],      // 8
    [true, true, true, true, false, true, true],     // 9
];

fn glyph_pixels(class: u32) -> Vec<(usize, usize)> {
    let segs = DIGIT_SEGMENTS[class as usize % 10];
    let w = GLYPH_COLS;
    let h = GLYPH_ROWS;
    let thick = 3usize;
    let mid = h / 2;
    let mut on = vec![false; w * h];
    let mut hbar = |row0: usize| {
        for r in row0..(row0 + thick).min(h) {
            for c in 0..w {
                on[r * w + c] = true;
            }
        }
    };
    if segs[0] {
        hbar(0);
    }
    if segs[3] {
        hbar(h - thick);
    }
    if segs[6] {
        hbar(mid - thick / 2);
    }
    let mut vbar = |col0: usize, r0: usize, r1: usize| {
        for r in r0..r1 {
            for c in col0..(col0 + thick).min(w) {
                on[r * w + c] = true;
            }
        }
    };
    if segs[5] {
        vbar(0, 0, mid);
    }
    if segs[4] {
        vbar(0, mid, h);
    }
    if segs[1] {
        vbar(w - thick, 0, mid);
    }
    if segs[2] {
        vbar(w - thick, mid, h);
    }
    (0..h)
        .flat_map(|r| (0..w).map(move |c| (c, r)))
        .filter(|&(c, r)| on[r * w + c])
        .collect()
}

/// Parameters for the labeled digit-glyph workload.
#[derive(Debug, Clone, Copy)]
pub struct DigitParams {
    pub sensor_width: u16,
    pub sensor_height: u16,
    pub duration_us: u64,
    /// Event rate per glyph pixel.
    pub on_rate_hz: f64,
    /// Background noise rate per off pixel.
    pub noise_rate_hz: f64,
    /// Maximum random glyph translation, pixels per axis.
    pub jitter_px: u16,
}

impl Default for DigitParams {
    fn default() -> Self {
        DigitParams {
            sensor_width: 34,
            sensor_height: 34,
            duration_us: 100_000,
            on_rate_hz: 120.0,
            noise_rate_hz: 4.0,
            jitter_px: 4,
        }
    }
}

/// One labeled sample: a jittered seven-segment glyph of `class` driven by
/// per-pixel Poisson events over background noise.
pub fn synth_digit(class: u32, params: &DigitParams, seed: u64) -> Result<EventStream> {
    if params.sensor_width as usize <= GLYPH_COLS + 2 * params.jitter_px as usize
        || params.sensor_height as usize <= GLYPH_ROWS + 2 * params.jitter_px as usize
    {
        return Err(Error::Config(format!(
            "sensor {}x{} too small for glyph with jitter {}",
            params.sensor_width, params.sensor_height, params.jitter_px
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = params.sensor_width as usize;
    let h = params.sensor_height as usize;
    let margin_x = (w - GLYPH_COLS) / 2;
    let margin_y = (h - GLYPH_ROWS) / 2;
    let j = params.jitter_px as i64;
    let dx = margin_x as i64 + rng.gen_range(-j..=j);
    let dy = margin_y as i64 + rng.gen_range(-j..=j);

    let mut on = vec![false; w * h];
    for (c, r) in glyph_pixels(class) {
        let x = c as i64 + dx;
        let y = r as i64 + dy;
        if (0..w as i64).contains(&x) && (0..h as i64).contains(&y) {
            on[y as usize * w + x as usize] = true;
        }
    }

    let mut events = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let rate = if on[y * w + x] {
                params.on_rate_hz
            } else {
                params.noise_rate_hz
            };
            if rate <= 0.0 {
                continue;
            }
            let mut t = 0f64;
            loop {
                let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
                t += -u.ln() / rate * 1e6;
                if t >= params.duration_us as f64 {
                    break;
                }
                events.push(Event {
                    x: x as u16,
                    y: y as u16,
                    t: t as u32,
                    polarity: rng.gen(),
                });
            }
        }
    }
    events.sort_by_key(|e| (e.t, e.x, e.y, e.polarity));
    Ok(EventStream {
        events,
        sensor_width: params.sensor_width,
        sensor_height: params.sensor_height,
        duration_us: params.duration_us,
        label: Some(class % 10),
    })
}

/// Write a stream as columnar text: header `width height duration`, then one
/// `x y t polarity` line per event.
pub fn write_text_stream(path: &Path, stream: &EventStream) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(
        out,
        "{} {} {}",
        stream.sensor_width, stream.sensor_height, stream.duration_us
    )?;
    for e in &stream.events {
        writeln!(out, "{} {} {} {}", e.x, e.y, e.t, e.polarity as u8)?;
    }
    out.flush()?;
    Ok(())
}

/// Read a stream from the columnar text format.
pub fn read_text_stream(path: &Path) -> Result<EventStream> {
    let file = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut lines = file.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Config("empty stream file".into()))??;
    let parts: Vec<u64> = header
        .split_whitespace()
        .map(|p| p.parse::<u64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Config(format!("bad stream header '{header}': {e}")))?;
    if parts.len() != 3 {
        return Err(Error::Config(format!(
            "stream header must be 'width height duration', got '{header}'"
        )));
    }
    let mut events = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(Error::Config(format!(
                "event line {}: expected 'x y t polarity', got '{line}'",
                i + 2
            )));
        }
        let parse =
            |s: &str| -> Result<u64> { s.parse().map_err(|e| Error::Config(format!("{e}"))) };
        events.push(Event {
            x: parse(fields[0])? as u16,
            y: parse(fields[1])? as u16,
            t: parse(fields[2])? as u32,
            polarity: parse(fields[3])? != 0,
        });
    }
    let stream = EventStream {
        events,
        sensor_width: parts[0] as u16,
        sensor_height: parts[1] as u16,
        duration_us: parts[2],
        label: None,
    };
    stream.validate()?;
    Ok(stream)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_rate_gives_empty_stream() {
        let s = synth_poisson(0.0, 10, 1_000_000, 1).unwrap();
        assert!(s.events.is_empty());
    }

    #[test]
    fn same_seed_reproduces_stream() {
        let a = synth_poisson(80.0, 16, 500_000, 7).unwrap();
        let b = synth_poisson(80.0, 16, 500_000, 7).unwrap();
        assert_eq!(a, b);
        let c = synth_poisson(80.0, 16, 500_000, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn poisson_count_within_three_sigma() {
        // rate 100/s x 10 neurons x 10 s: expect 10_000 +- 300.
        let s = synth_poisson(100.0, 10, 10_000_000, 7).unwrap();
        let n = s.events.len() as f64;
        assert!((n - 10_000.0).abs() <= 300.0, "total count {n}");
        // Per-neuron expectation 1000, 3 sigma ~ 95.
        for neuron in 0..10u16 {
            let c = s.events.iter().filter(|e| e.x == neuron).count() as f64;
            assert!((c - 1000.0).abs() <= 95.0, "neuron {neuron} count {c}");
        }
    }

    #[test]
    fn timestamps_sorted_and_in_range() {
        let s = synth_poisson(200.0, 4, 250_000, 3).unwrap();
        for w in s.events.windows(2) {
            assert!(w[0].t <= w[1].t);
        }
        assert!(s.events.iter().all(|e| (e.t as u64) < s.duration_us));
    }

    #[test]
    fn burst_window_multiplies_density() {
        let dur = 4_000_000;
        let s = synth_burst(20.0, 200.0, &[(2_000_000, 3_000_000)], 8, dur, 11).unwrap();
        let in_window = s
            .events
            .iter()
            .filter(|e| (2_000_000..3_000_000).contains(&(e.t as u64)))
            .count() as f64;
        let before = s
            .events
            .iter()
            .filter(|e| (1_000_000..2_000_000).contains(&(e.t as u64)))
            .count() as f64;
        // 10x rate ratio; allow generous statistical slack.
        assert!(in_window > 5.0 * before, "in {in_window}, before {before}");
    }

    #[test]
    fn full_coverage_window_is_pure_burst_rate() {
        let s = synth_burst(10.0, 150.0, &[(0, 1_000_000)], 12, 1_000_000, 5).unwrap();
        // Expect ~150 * 12 = 1800 events, sigma ~ 42.
        let n = s.events.len() as f64;
        assert!((n - 1800.0).abs() < 150.0, "count {n}");
    }

    #[test]
    fn overlapping_windows_rejected() {
        let r = synth_burst(10.0, 20.0, &[(0, 500), (400, 900)], 4, 1000, 1);
        assert!(r.is_err());
        let r = synth_burst(10.0, 20.0, &[(0, 2000)], 4, 1000, 1);
        assert!(r.is_err());
    }

    #[test]
    fn digit_classes_have_distinct_footprints() {
        let p = DigitParams {
            noise_rate_hz: 0.0,
            jitter_px: 0,
            ..DigitParams::default()
        };
        let mut footprints = Vec::new();
        for class in 0..10 {
            let s = synth_digit(class, &p, 42).unwrap();
            assert_eq!(s.label, Some(class));
            let mut pixels: Vec<(u16, u16)> = s.events.iter().map(|e| (e.x, e.y)).collect();
            pixels.sort_unstable();
            pixels.dedup();
            footprints.push(pixels);
        }
        for a in 0..10 {
            for b in (a + 1)..10 {
                assert_ne!(footprints[a], footprints[b], "classes {a} and {b}");
            }
        }
    }

    #[test]
    fn text_dump_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("stream.txt");
        let s = synth_burst(30.0, 90.0, &[(100_000, 200_000)], 6, 400_000, 9).unwrap();
        write_text_stream(&path, &s).unwrap();
        let back = read_text_stream(&path).unwrap();
        assert_eq!(back.events, s.events);
        assert_eq!(back.sensor_width, s.sensor_width);
        assert_eq!(back.duration_us, s.duration_us);
    }
}
