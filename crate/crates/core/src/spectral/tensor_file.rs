//! Flat binary tensor files.
//!
//! Layout (all little-endian): 4-byte magic `NHDT`, `u32` version, `u32` rank, `rank` x `u32`
//! dimensions, then the row-major payload as `f32`.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::{ArrayD, IxDyn};

use super::Spectrogram;
use crate::error::{Error, Result};

pub const TENSOR_MAGIC: &[u8; 4] = b"NHDT";
pub const TENSOR_VERSION: u32 = 1;

pub fn encode_tensor(t: &ArrayD<f64>) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + 4 * t.ndim() + 4 * t.len());
    out.extend_from_slice(TENSOR_MAGIC);
    out.extend_from_slice(&TENSOR_VERSION.to_le_bytes());
    out.extend_from_slice(&(t.ndim() as u32).to_le_bytes());
    for &d in t.shape() {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for &v in t.iter() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

pub fn decode_tensor(bytes: &[u8]) -> Result<ArrayD<f64>> {
    let bad = |msg: &str| Error::Data(format!("tensor file: {msg}"));
    let u32_at = |at: usize| -> Result<u32> {
        bytes
            .get(at..at + 4)
            .map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .ok_or_else(|| bad("truncated header"))
    };
    if bytes.get(0..4) != Some(TENSOR_MAGIC.as_slice()) {
        return Err(bad("bad magic"));
    }
    let version = u32_at(4)?;
    if version != TENSOR_VERSION {
        return Err(Error::Version { what: "tensor file", found: version, expected: TENSOR_VERSION });
    }
    let rank = u32_at(8)? as usize;
    let dims = (0..rank).map(|i| u32_at(12 + 4 * i).map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
    let start = 12 + 4 * rank;
    let count: usize = dims.iter().product();
    let payload = bytes.get(start..).ok_or_else(|| bad("truncated header"))?;
    if payload.len() != 4 * count {
        return Err(bad(&format!("payload is {} bytes, dims {dims:?} need {}", payload.len(), 4 * count)));
    }
    let data = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    ArrayD::from_shape_vec(IxDyn(&dims), data).map_err(|e| bad(&e.to_string()))
}

pub fn write_tensor(path: &Path, t: &ArrayD<f64>) -> Result<()> {
    std::fs::write(path, encode_tensor(t)).map_err(|e| Error::io(path, e))
}

pub fn read_tensor(path: &Path) -> Result<ArrayD<f64>> {
    decode_tensor(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
}

/// CSV view of a spectrogram: one row per frequency bin, one column per frame.
pub fn spectrogram_to_csv(s: &Spectrogram) -> String {
    let mut out = String::from("bin");
    for f in 0..s.frames() {
        let _ = write!(out, ",frame{f}");
    }
    out.push('\n');
    for (b, row) in s.values.rows().into_iter().enumerate() {
        let _ = write!(out, "{b}");
        for v in row {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn round_trip_within_f32(dims in proptest::collection::vec(1usize..5, 1..4), seed in any::<u32>()) {
            let n: usize = dims.iter().product();
            let data: Vec<f64> = (0..n).map(|i| ((i as u64 * 2654435761 + seed as u64) % 1000) as f64 / 37.0 - 10.0).collect();
            let t = ArrayD::from_shape_vec(IxDyn(&dims), data).unwrap();
            let back = decode_tensor(&encode_tensor(&t)).unwrap();
            prop_assert_eq!(back.shape(), t.shape());
            for (a, b) in back.iter().zip(t.iter()) {
                prop_assert!((a - b).abs() <= 1e-6 * b.abs().max(1.0));
            }
        }
    }

    #[test]
    fn rejects_wrong_version_and_truncation() {
        let t = ArrayD::from_elem(IxDyn(&[2, 3]), 1.5);
        let mut bytes = encode_tensor(&t);
        assert_eq!(&bytes[..4], b"NHDT");
        assert!(decode_tensor(&bytes[..bytes.len() - 1]).is_err());
        bytes[4] = 2;
        assert!(matches!(decode_tensor(&bytes), Err(Error::Version { found: 2, .. })));
    }

    #[test]
    fn csv_layout() {
        let s = Spectrogram::from_values(ndarray::array![[1.0, 2.0], [3.0, 4.5]]);
        assert_eq!(spectrogram_to_csv(&s), "bin,frame0,frame1\n0,1,2\n1,3,4.5\n");
    }
}
