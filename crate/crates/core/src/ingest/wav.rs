//! Minimal RIFF/WAVE codec: PCM 16-bit and IEEE float 32-bit, mono or stereo.

use super::Waveform;
use crate::error::{Error, Result};

const FORMAT_PCM: u16 = 1;
const FORMAT_IEEE_FLOAT: u16 = 3;

/// Sample encoding used when writing WAV files.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleFormat {
    Pcm16,
    Float32,
}

struct FmtChunk {
    format: u16,
    channels: u16,
    sample_rate: u32,
    bits: u16,
}

fn read_u16(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn read_u32(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

fn decode_err(chunk: &'static str, detail: impl Into<String>) -> Error {
    Error::Decode { chunk, detail: detail.into() }
}

/// Decode a WAV byte buffer into a mono waveform.
///
/// Stereo input is averaged to mono; 16-bit samples are scaled by 1/32768.
pub fn decode_wav(bytes: &[u8]) -> Result<Waveform> {
    if bytes.len() < 12 {
        return Err(decode_err("RIFF", format!("file is {} bytes, header needs 12", bytes.len())));
    }
    if &bytes[0..4] != b"RIFF" {
        return Err(decode_err("RIFF", "missing RIFF magic"));
    }
    if &bytes[8..12] != b"WAVE" {
        return Err(decode_err("RIFF", "missing WAVE form type"));
    }

    let mut fmt: Option<FmtChunk> = None;
    let mut data: Option<&[u8]> = None;
    let mut pos = 12;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = read_u32(bytes, pos + 4) as usize;
        let body_start = pos + 8;
        let body_end = body_start.saturating_add(size);
        match id {
            b"fmt " => {
                if size < 16 || body_end > bytes.len() {
                    return Err(decode_err("fmt", format!("chunk of {size} bytes is truncated")));
                }
                let b = &bytes[body_start..body_end];
                fmt = Some(FmtChunk {
                    format: read_u16(b, 0),
                    channels: read_u16(b, 2),
                    sample_rate: read_u32(b, 4),
                    bits: read_u16(b, 14),
                });
            }
            b"data" => {
                if body_end > bytes.len() {
                    return Err(decode_err(
                        "data",
                        format!("declares {size} bytes but only {} remain", bytes.len() - body_start),
                    ));
                }
                data = Some(&bytes[body_start..body_end]);
            }
            _ => {}
        }
        // chunks are word aligned
        pos = body_end.saturating_add(size & 1);
    }

    let fmt = fmt.ok_or_else(|| decode_err("fmt", "chunk not found"))?;
    let data = data.ok_or_else(|| decode_err("data", "chunk not found"))?;

    let supported = matches!((fmt.format, fmt.bits), (FORMAT_PCM, 16) | (FORMAT_IEEE_FLOAT, 32))
        && matches!(fmt.channels, 1 | 2);
    if !supported {
        return Err(Error::UnsupportedFormat { format: fmt.format, bits: fmt.bits, channels: fmt.channels });
    }
    if fmt.sample_rate == 0 {
        return Err(decode_err("fmt", "sample rate is zero"));
    }

    let channels = fmt.channels as usize;
    let width = fmt.bits as usize / 8;
    let frame = width * channels;
    if data.len() % frame != 0 {
        return Err(decode_err("data", format!("{} bytes is not a whole number of {frame}-byte frames", data.len())));
    }
    if data.is_empty() {
        return Err(decode_err("data", "no samples"));
    }

    let sample = |at: usize| -> f64 {
        if fmt.format == FORMAT_PCM {
            i16::from_le_bytes([data[at], data[at + 1]]) as f64 / 32768.0
        } else {
            f32::from_le_bytes([data[at], data[at + 1], data[at + 2], data[at + 3]]) as f64
        }
    };
    let samples: Vec<f64> = data
        .chunks_exact(frame)
        .enumerate()
        .map(|(i, _)| {
            let base = i * frame;
            let sum: f64 = (0..channels).map(|c| sample(base + c * width)).sum();
            sum / channels as f64
        })
        .collect();
    if samples.iter().any(|s| !s.is_finite()) {
        return Err(decode_err("data", "non-finite sample"));
    }

    Waveform::new(samples, fmt.sample_rate)
}

/// Encode a mono waveform. PCM16 quantizes with round-to-nearest and clamps to the i16 range.
pub fn encode_wav(w: &Waveform, format: SampleFormat) -> Vec<u8> {
    let (tag, bits) = match format {
        SampleFormat::Pcm16 => (FORMAT_PCM, 16u16),
        SampleFormat::Float32 => (FORMAT_IEEE_FLOAT, 32u16),
    };
    let width = bits as u32 / 8;
    let data_len = w.samples.len() as u32 * width;
    let mut out = Vec::with_capacity(44 + data_len as usize);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&tag.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&w.sample_rate.to_le_bytes());
    out.extend_from_slice(&(w.sample_rate * width).to_le_bytes());
    out.extend_from_slice(&(width as u16).to_le_bytes());
    out.extend_from_slice(&bits.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for &s in &w.samples {
        match format {
            SampleFormat::Pcm16 => {
                let q = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
                out.extend_from_slice(&q.to_le_bytes());
            }
            SampleFormat::Float32 => out.extend_from_slice(&(s as f32).to_le_bytes()),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pcm16_file(channels: u16, rate: u32, interleaved: &[i16]) -> Vec<u8> {
        let data_len = (interleaved.len() * 2) as u32;
        let mut out = Vec::new();
        out.extend_from_slice(b"RIFF");
        out.extend_from_slice(&(36 + data_len).to_le_bytes());
        out.extend_from_slice(b"WAVEfmt ");
        out.extend_from_slice(&16u32.to_le_bytes());
        out.extend_from_slice(&1u16.to_le_bytes());
        out.extend_from_slice(&channels.to_le_bytes());
        out.extend_from_slice(&rate.to_le_bytes());
        out.extend_from_slice(&(rate * 2 * channels as u32).to_le_bytes());
        out.extend_from_slice(&(2 * channels).to_le_bytes());
        out.extend_from_slice(&16u16.to_le_bytes());
        out.extend_from_slice(b"data");
        out.extend_from_slice(&data_len.to_le_bytes());
        for s in interleaved {
            out.extend_from_slice(&s.to_le_bytes());
        }
        out
    }

    #[test]
    fn pcm16_scaling() {
        let bytes = pcm16_file(1, 8000, &[0, 16384, -16384, 32767]);
        let w = decode_wav(&bytes).unwrap();
        assert_eq!(w.sample_rate, 8000);
        assert_eq!(w.samples, vec![0.0, 0.5, -0.5, 32767.0 / 32768.0]);
    }

    #[test]
    fn stereo_is_averaged() {
        let w = Waveform::new(vec![1.0, 1.0, 1.0], 16000).unwrap();
        // interleave a float32 stereo file by hand: left 1.0, right 0.0
        let mono = encode_wav(&w, SampleFormat::Float32);
        let mut stereo = mono[..44].to_vec();
        stereo[22..24].copy_from_slice(&2u16.to_le_bytes());
        stereo[32..34].copy_from_slice(&8u16.to_le_bytes());
        stereo[40..44].copy_from_slice(&24u32.to_le_bytes());
        for _ in 0..3 {
            stereo.extend_from_slice(&1.0f32.to_le_bytes());
            stereo.extend_from_slice(&0.0f32.to_le_bytes());
        }
        let out = decode_wav(&stereo).unwrap();
        assert_eq!(out.samples, vec![0.5, 0.5, 0.5]);
    }

    #[test]
    fn truncated_data_chunk_is_rejected() {
        let bytes = pcm16_file(1, 16000, &[1, 2, 3, 4, 5, 6]);
        let cut = &bytes[..bytes.len() - 3];
        match decode_wav(cut) {
            Err(Error::Decode { chunk, .. }) => assert_eq!(chunk, "data"),
            other => panic!("expected data decode error, got {other:?}"),
        }
    }

    #[test]
    fn bad_magic_names_riff() {
        let mut bytes = pcm16_file(1, 16000, &[1, 2]);
        bytes[0] = b'X';
        assert!(matches!(decode_wav(&bytes), Err(Error::Decode { chunk: "RIFF", .. })));
    }

    #[test]
    fn unsupported_encoding() {
        let mut bytes = pcm16_file(1, 16000, &[1, 2]);
        // claim 24-bit
        bytes[34..36].copy_from_slice(&24u16.to_le_bytes());
        assert!(matches!(decode_wav(&bytes), Err(Error::UnsupportedFormat { bits: 24, .. })));
    }

    #[test]
    fn float32_round_trip() {
        let w = Waveform::new(vec![0.25, -0.125, 0.999_999_940_395_355_2], 22050).unwrap();
        let back = decode_wav(&encode_wav(&w, SampleFormat::Float32)).unwrap();
        assert_eq!(back.samples, w.samples);
        assert_eq!(back.sample_rate, 22050);
    }

    proptest! {
        #[test]
        fn pcm16_round_trip_is_exact_after_quantization(raw in proptest::collection::vec(any::<i16>(), 1..200)) {
            let w = Waveform::new(raw.iter().map(|&q| q as f64 / 32768.0).collect(), 16000).unwrap();
            let back = decode_wav(&encode_wav(&w, SampleFormat::Pcm16)).unwrap();
            prop_assert_eq!(back.samples, w.samples);
        }
    }
}
