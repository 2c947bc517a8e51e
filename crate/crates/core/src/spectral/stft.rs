use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::Array2;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::{MagnitudeScale, Spectrogram, StftConfig, WindowFn};
use crate::error::{Error, Result};
use crate::ingest::Segment;

const LOG_FLOOR: f64 = 1e-10;

/// Periodic Hann window.
pub fn hann_window(n: usize) -> Vec<f64> {
    (0..n).map(|i| 0.5 * (1.0 - (2.0 * PI * i as f64 / n as f64).cos())).collect()
}

/// Number of frames produced for a signal of length `len`.
///
/// With centre padding `floor(len / hop) + 1`, otherwise `floor((len - window) / hop) + 1`.
/// Returns `None` when the signal is too short to produce a frame.
pub fn frame_count(len: usize, window: usize, hop: usize, center: bool) -> Option<usize> {
    if hop == 0 {
        return None;
    }
    if center {
        // reflect padding needs more than window/2 samples
        (len > window / 2).then(|| len / hop + 1)
    } else {
        (len >= window).then(|| (len - window) / hop + 1)
    }
}

/// Reusable STFT plan.
pub struct Stft {
    config: StftConfig,
    window: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
}

impl Stft {
    pub fn new(config: StftConfig) -> Result<Self> {
        config.validate()?;
        let window = match config.window_fn {
            WindowFn::Hann => hann_window(config.window_length),
        };
        let fft = FftPlanner::new().plan_fft_forward(config.window_length);
        Ok(Stft { config, window, fft })
    }

    pub fn config(&self) -> &StftConfig {
        &self.config
    }

    /// Transform raw samples into a `[freq_bins, frames]` plane.
    pub fn compute(&self, samples: &[f64]) -> Result<Array2<f64>> {
        let cfg = &self.config;
        let n_win = cfg.window_length;
        let frames = cfg.frames_for(samples.len()).ok_or_else(|| {
            Error::config(format!(
                "signal of {} samples too short for window {} (center_pad={})",
                samples.len(),
                n_win,
                cfg.center_pad
            ))
        })?;

        let pad = if cfg.center_pad { n_win / 2 } else { 0 };
        let n = samples.len() as isize;
        // reflect without repeating the edge sample, folding again if the pad exceeds the signal
        let period = (2 * (n - 1)).max(1);
        let at = |i: isize| -> f64 {
            let m = i.rem_euclid(period);
            let j = if m < n { m } else { period - m };
            samples[j as usize]
        };

        let mut out = Array2::zeros((cfg.freq_bins, frames));
        let mut buf = vec![Complex::new(0.0, 0.0); n_win];
        let mut scratch = vec![Complex::new(0.0, 0.0); self.fft.get_inplace_scratch_len()];
        for f in 0..frames {
            let start = (f * cfg.hop_length) as isize - pad as isize;
            for (k, slot) in buf.iter_mut().enumerate() {
                *slot = Complex::new(at(start + k as isize) * self.window[k], 0.0);
            }
            self.fft.process_with_scratch(&mut buf, &mut scratch);
            for b in 0..cfg.freq_bins {
                let power = buf[b].norm_sqr();
                out[[b, f]] = match cfg.magnitude_scale {
                    MagnitudeScale::LogPower => 10.0 * (power + LOG_FLOOR).log10(),
                    MagnitudeScale::Linear => power.sqrt(),
                };
            }
        }
        Ok(out)
    }

    pub fn segment(&self, seg: &Segment) -> Result<Spectrogram> {
        Ok(Spectrogram {
            values: self.compute(&seg.samples)?,
            config: self.config,
            source_id: seg.source_id.clone(),
            offset_seconds: seg.offset_seconds,
        })
    }
}

/// One-shot STFT of a segment.
pub fn stft(seg: &Segment, cfg: &StftConfig) -> Result<Spectrogram> {
    Stft::new(*cfg)?.segment(seg)
}
