use thiserror::Error;

/// Errors produced by decoding, simulation, and training.
#[derive(Debug, Error)]
pub enum Error {
    #[error("truncated record at byte offset {offset}: {len} bytes is not a multiple of {record_size}")]
    TruncatedRecord {
        offset: usize,
        len: usize,
        record_size: usize,
    },

    #[error("record {record}: pixel ({x}, {y}) outside {width}x{height} sensor")]
    PixelOutOfRange {
        record: usize,
        x: u16,
        y: u16,
        width: u16,
        height: u16,
    },

    #[error("timestamp {t} exceeds the {bits}-bit field of the record format")]
    TimestampOverflow { t: u64, bits: u32 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-finite input current at layer {layer}, neuron {neuron}")]
    NonFiniteInput { layer: usize, neuron: usize },

    #[error("non-finite threshold update at neuron {neuron}")]
    NonFiniteThreshold { neuron: usize },

    #[error("training diverged (non-finite loss) at epoch {epoch}, batch {batch}")]
    TrainingDiverged { epoch: usize, batch: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
