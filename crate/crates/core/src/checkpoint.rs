//! Binary checkpoint format.
//!
//! All integers and floats are little-endian.
//!
//! | offset | size  | field                                              |
//! |--------|-------|----------------------------------------------------|
//! | 0      | 4     | magic `b"FHCK"`                                    |
//! | 4      | 2     | format version, `u16` = 1                          |
//! | 6      | 2     | flags, `u16`; bit 0 set when a seed is recorded    |
//! | 8      | 8     | seed, `u64` (0 when flag bit 0 is clear)           |
//! | 16     | 8     | grid `N`, `u64`                                    |
//! | 24     | 4     | grid convention, `u32` (0 = open, 1 = paper)       |
//! | 28     | 4     | number of layer sizes `L`, `u32`                   |
//! | 32     | 8·L   | layer sizes, `u64` each                            |
//! | 32+8L  | 8     | number of parameter values `P`, `u64`              |
//! | 40+8L  | 8·P   | values, `f64`: per layer, weight row-major then bias |
//!
//! `P` must equal the count implied by the layer sizes and the stream must
//! end right after the last value.

use crate::error::{Error, Result};
use crate::model::{Layer, ModelParams};
use crate::sampler::GridConvention;
use crate::tensor::Tensor;

pub const MAGIC: [u8; 4] = *b"FHCK";
pub const VERSION: u16 = 1;
const FLAG_SEED: u16 = 1;

/// Params plus the grid they were trained on.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams,
    pub grid_n: usize,
    pub grid_convention: GridConvention,
}

pub fn save_params(checkpoint: &Checkpoint) -> Vec<u8> {
    let params = &checkpoint.params;
    let sizes = params.layer_sizes();
    let mut out = Vec::with_capacity(40 + 8 * sizes.len() + 8 * params.num_values());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    let flags = if params.seed().is_some() { FLAG_SEED } else { 0 };
    out.extend_from_slice(&flags.to_le_bytes());
    out.extend_from_slice(&params.seed().unwrap_or(0).to_le_bytes());
    out.extend_from_slice(&(checkpoint.grid_n as u64).to_le_bytes());
    let conv: u32 = match checkpoint.grid_convention {
        GridConvention::Open => 0,
        GridConvention::Paper => 1,
    };
    out.extend_from_slice(&conv.to_le_bytes());
    out.extend_from_slice(&(sizes.len() as u32).to_le_bytes());
    for s in &sizes {
        out.extend_from_slice(&(*s as u64).to_le_bytes());
    }
    out.extend_from_slice(&(params.num_values() as u64).to_le_bytes());
    for t in params.tensors() {
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn err(&self, reason: impl Into<String>) -> Error {
        Error::MalformedCheckpoint {
            offset: self.pos,
            reason: reason.into(),
        }
    }

    fn take<const K: usize>(&mut self, what: &str) -> Result<[u8; K]> {
        let end = self.pos + K;
        let chunk = self
            .bytes
            .get(self.pos..end)
            .ok_or_else(|| self.err(format!("truncated while reading {what}")))?;
        self.pos = end;
        Ok(chunk.try_into().expect("length checked"))
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        self.take::<2>(what).map(u16::from_le_bytes)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        self.take::<4>(what).map(u32::from_le_bytes)
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        self.take::<8>(what).map(u64::from_le_bytes)
    }
}

pub fn load_params(bytes: &[u8]) -> Result<Checkpoint> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take::<4>("magic")? != MAGIC {
        r.pos = 0;
        return Err(r.err("bad magic bytes"));
    }
    let version = r.u16("version")?;
    if version != VERSION {
        r.pos -= 2;
        return Err(r.err(format!("unsupported version {version}")));
    }
    let flags = r.u16("flags")?;
    if flags & !FLAG_SEED != 0 {
        r.pos -= 2;
        return Err(r.err(format!("unknown flags {flags:#06x}")));
    }
    let seed = r.u64("seed")?;
    let grid_n = r.u64("grid size")? as usize;
    let grid_convention = match r.u32("grid convention")? {
        0 => GridConvention::Open,
        1 => GridConvention::Paper,
        other => {
            r.pos -= 4;
            return Err(r.err(format!("unknown grid convention {other}")));
        }
    };
    let n_sizes = r.u32("layer count")? as usize;
    if n_sizes < 2 {
        r.pos -= 4;
        return Err(r.err(format!("need at least 2 layer sizes, got {n_sizes}")));
    }
    let mut sizes = Vec::with_capacity(n_sizes.min(1024));
    for _ in 0..n_sizes {
        sizes.push(r.u64("layer size")? as usize);
    }
    let expected = sizes
        .windows(2)
        .try_fold(0usize, |acc, w| {
            w[0].checked_mul(w[1])?.checked_add(w[1])?.checked_add(acc)
        })
        .ok_or_else(|| r.err(format!("layer sizes {sizes:?} overflow")))?;
    let declared = r.u64("value count")? as usize;
    if declared != expected {
        r.pos -= 8;
        return Err(r.err(format!(
            "declared {declared} values but layer sizes {sizes:?} need {expected}"
        )));
    }
    let available = (bytes.len() - r.pos) / 8;
    if available != declared || (bytes.len() - r.pos) % 8 != 0 {
        let reason = if available < declared {
            format!("truncated: declared {declared} values, found {available}")
        } else {
            format!(
                "{} trailing bytes after {declared} values",
                bytes.len() - r.pos - 8 * declared
            )
        };
        return Err(r.err(reason));
    }
    let mut layers = Vec::with_capacity(sizes.len() - 1);
    for w in sizes.windows(2) {
        let mut read = |len: usize| -> Result<Vec<f64>> {
            (0..len).map(|_| r.take::<8>("value").map(f64::from_le_bytes)).collect()
        };
        let weight = Tensor::new(w[0], w[1], read(w[0] * w[1])?)?;
        let bias = Tensor::new(1, w[1], read(w[1])?)?;
        layers.push(Layer { weight, bias });
    }
    let seed = (flags & FLAG_SEED != 0).then_some(seed);
    let params = ModelParams::from_layers(layers, seed).map_err(|e| Error::MalformedCheckpoint {
        offset: 28,
        reason: e.to_string(),
    })?;
    Ok(Checkpoint {
        params,
        grid_n,
        grid_convention,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Checkpoint {
        Checkpoint {
            params: ModelParams::init(&[18, 128, 128, 1], 7).unwrap(),
            grid_n: 256,
            grid_convention: GridConvention::Open,
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let ck = sample();
        let bytes = save_params(&ck);
        let back = load_params(&bytes).unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.params.seed(), Some(7));
        assert_eq!(save_params(&back), bytes);
    }

    #[test]
    fn header_layout() {
        let bytes = save_params(&sample());
        assert_eq!(&bytes[..4], b"FHCK");
        assert_eq!(u16::from_le_bytes([bytes[4], bytes[5]]), 1);
        assert_eq!(u64::from_le_bytes(bytes[8..16].try_into().unwrap()), 7);
        assert_eq!(u64::from_le_bytes(bytes[16..24].try_into().unwrap()), 256);
        assert_eq!(u32::from_le_bytes(bytes[28..32].try_into().unwrap()), 4);
        let n_values = 18 * 128 + 128 + 128 * 128 + 128 + 128 + 1;
        assert_eq!(bytes.len(), 32 + 8 * 4 + 8 + 8 * n_values);
    }

    #[test]
    fn unseeded_params_round_trip() {
        let ck = Checkpoint {
            params: ModelParams::zeros(&[5, 3, 1]).unwrap(),
            grid_n: 64,
            grid_convention: GridConvention::Paper,
        };
        assert_eq!(load_params(&save_params(&ck)).unwrap(), ck);
    }

    #[test]
    fn truncated_stream() {
        let bytes = save_params(&sample());
        for cut in [0, 3, 10, 40, bytes.len() - 1] {
            let err = load_params(&bytes[..cut]).unwrap_err();
            assert!(matches!(err, Error::MalformedCheckpoint { .. }), "cut {cut}: {err}");
        }
    }

    #[test]
    fn mismatched_declared_length() {
        let mut bytes = save_params(&sample());
        let at = 32 + 8 * 4;
        let declared = u64::from_le_bytes(bytes[at..at + 8].try_into().unwrap());
        bytes[at..at + 8].copy_from_slice(&(declared + 1).to_le_bytes());
        match load_params(&bytes) {
            Err(Error::MalformedCheckpoint { offset, reason }) => {
                assert_eq!(offset, at);
                assert!(reason.contains("declared"), "{reason}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn trailing_bytes_and_bad_magic() {
        let mut bytes = save_params(&sample());
        bytes.push(0);
        assert!(load_params(&bytes).is_err());
        let mut bytes = save_params(&sample());
        bytes[0] = b'X';
        assert!(matches!(
            load_params(&bytes),
            Err(Error::MalformedCheckpoint { offset: 0, .. })
        ));
    }
}
