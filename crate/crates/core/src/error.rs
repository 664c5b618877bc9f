use std::fmt;

/// Rows × columns, used in error messages.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Shape(pub usize, pub usize);

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.0, self.1)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {left} vs {right}")]
    ShapeMismatch {
        op: &'static str,
        left: Shape,
        right: Shape,
    },

    #[error("tensor data has {len} values, expected {rows}x{cols}")]
    BadTensorData { rows: usize, cols: usize, len: usize },

    #[error("backward requires a 1x1 loss, got {0}")]
    NonScalarLoss(Shape),

    #[error("invalid layer sizes {sizes:?}: {reason}")]
    InvalidLayerSizes { sizes: Vec<usize>, reason: &'static str },

    #[error("grid needs at least 2 samples, got {0}")]
    GridTooSmall(usize),

    #[error("frequency {omega} aliases on a {n}-point grid (need omega < {n}/2)")]
    Aliasing { omega: usize, n: usize },

    #[error("duplicate frequency {0} in request")]
    DuplicateFrequency(usize),

    #[error("input index {index} out of range for one-hot encoding of length {len}")]
    InputOutOfRange { index: usize, len: usize },

    #[error("waveform has non-finite value at sample {0}")]
    NonFiniteWaveform(usize),

    #[error("malformed checkpoint at byte {offset}: {reason}")]
    MalformedCheckpoint { offset: usize, reason: String },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("training diverged at step {step}: non-finite {what}")]
    Diverged { step: usize, what: &'static str },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
