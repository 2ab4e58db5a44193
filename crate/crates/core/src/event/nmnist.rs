//! Bit-exact codec for the N-MNIST 5-byte event record format.
//!
//! Record layout (40 bits): byte 0 = x, byte 1 = y, byte 2 bit 7 = polarity,
//! byte 2 bits 6..0 ++ byte 3 ++ byte 4 = 23-bit big-endian timestamp in
//! microseconds. Samples are stored file-per-sample in directory-per-class
//! layout.

use std::path::Path;

use crate::error::{Error, Result};
use crate::event::{Event, EventStream};

pub const SENSOR_WIDTH: u16 = 34;
pub const SENSOR_HEIGHT: u16 = 34;
pub const RECORD_SIZE: usize = 5;
const TIMESTAMP_BITS: u32 = 23;
const TIMESTAMP_MAX: u32 = (1 << TIMESTAMP_BITS) - 1;

/// Decode an N-MNIST blob into a time-sorted event stream.
///
/// The sort is stable, so blobs whose records are already in non-decreasing
/// timestamp order round-trip bit-exactly through [`encode`].
pub fn decode(bytes: &[u8]) -> Result<EventStream> {
    decode_with_geometry(bytes, SENSOR_WIDTH, SENSOR_HEIGHT)
}

pub fn decode_with_geometry(bytes: &[u8], width: u16, height: u16) -> Result<EventStream> {
    if bytes.len() % RECORD_SIZE != 0 {
        return Err(Error::TruncatedRecord {
            offset: bytes.len() - bytes.len() % RECORD_SIZE,
            len: bytes.len(),
            record_size: RECORD_SIZE,
        });
    }
    let mut events = Vec::with_capacity(bytes.len() / RECORD_SIZE);
    for (record, chunk) in bytes.chunks_exact(RECORD_SIZE).enumerate() {
        let x = chunk[0] as u16;
        let y = chunk[1] as u16;
        if x >= width || y >= height {
            return Err(Error::PixelOutOfRange {
                record,
                x,
                y,
                width,
                height,
            });
        }
        let polarity = chunk[2] & 0x80 != 0;
        let t = ((chunk[2] & 0x7f) as u32) << 16 | (chunk[3] as u32) << 8 | chunk[4] as u32;
        events.push(Event { x, y, t, polarity });
    }
    events.sort_by_key(|e| e.t);
    let duration_us = events.iter().map(|e| e.t as u64).max().unwrap_or(0);
    Ok(EventStream {
        events,
        sensor_width: width,
        sensor_height: height,
        duration_us,
        label: None,
    })
}

/// Encode a stream back into the 5-byte record format.
pub fn encode(stream: &EventStream) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(stream.events.len() * RECORD_SIZE);
    for e in &stream.events {
        if e.t > TIMESTAMP_MAX {
            return Err(Error::TimestampOverflow {
                t: e.t as u64,
                bits: TIMESTAMP_BITS,
            });
        }
        out.push(e.x as u8);
        out.push(e.y as u8);
        out.push(((e.polarity as u8) << 7) | ((e.t >> 16) as u8 & 0x7f));
        out.push((e.t >> 8) as u8);
        out.push(e.t as u8);
    }
    Ok(out)
}

/// Read and decode one sample file; the label comes from the caller
/// (directory-per-class layout).
pub fn read_sample(path: &Path, label: Option<u32>) -> Result<EventStream> {
    let bytes = std::fs::read(path)?;
    let mut stream = decode(&bytes)?;
    stream.label = label;
    Ok(stream)
}

/// Encode and write one sample file.
pub fn write_sample(path: &Path, stream: &EventStream) -> Result<()> {
    let bytes = encode(stream)?;
    std::fs::write(path, bytes)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_unpacked_record() {
        // byte2 = 0x80: polarity bit set, high timestamp bits zero;
        // t = 0x00_00_0A = 10 us.
        let blob = [0x03u8, 0x04, 0x80, 0x00, 0x0a];
        let s = decode(&blob).unwrap();
        assert_eq!(s.events.len(), 1);
        let e = s.events[0];
        assert_eq!((e.x, e.y, e.t, e.polarity), (3, 4, 10, true));
    }

    #[test]
    fn timestamp_spans_all_three_bytes() {
        // t = 0b101_1010_0110_1100_1011_0001 = 0x5A6CB1, polarity 0.
        let blob = [0x00u8, 0x21, 0x5a, 0x6c, 0xb1];
        let s = decode(&blob).unwrap();
        let e = s.events[0];
        assert_eq!(e.t, 0x5a6cb1);
        assert!(!e.polarity);
        assert_eq!((e.x, e.y), (0, 33));
    }

    #[test]
    fn empty_blob_is_empty_stream() {
        let s = decode(&[]).unwrap();
        assert!(s.events.is_empty());
        assert_eq!(s.duration_us, 0);
    }

    #[test]
    fn truncated_blob_reports_offset() {
        let blob = [0u8; 6];
        match decode(&blob) {
            Err(Error::TruncatedRecord { offset, .. }) => assert_eq!(offset, 5),
            other => panic!("expected truncation error, got {other:?}"),
        }
    }

    #[test]
    fn out_of_range_pixel_reports_record_index() {
        let mut blob = vec![0u8, 0, 0, 0, 0];
        blob.extend_from_slice(&[34, 0, 0, 0, 1]); // x = 34 on a 34-wide sensor
        match decode(&blob) {
            Err(Error::PixelOutOfRange { record, x, .. }) => {
                assert_eq!(record, 1);
                assert_eq!(x, 34);
            }
            other => panic!("expected range error, got {other:?}"),
        }
    }

    #[test]
    fn decode_sorts_by_timestamp() {
        let blob = [
            1u8, 0, 0, 0, 200, // t = 200
            2, 0, 0, 0, 100, // t = 100
        ];
        let s = decode(&blob).unwrap();
        assert_eq!(s.events[0].t, 100);
        assert_eq!(s.events[1].t, 200);
        assert_eq!(s.events[0].x, 2);
    }

    #[test]
    fn encode_rejects_oversized_timestamp() {
        let stream = EventStream {
            events: vec![Event {
                x: 0,
                y: 0,
                t: 1 << 23,
                polarity: false,
            }],
            sensor_width: 34,
            sensor_height: 34,
            duration_us: 1 << 23,
            label: None,
        };
        assert!(matches!(
            encode(&stream),
            Err(Error::TimestampOverflow { .. })
        ));
    }
}
