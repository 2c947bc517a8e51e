use std::f64::consts::PI;

use super::Waveform;
use crate::error::{Error, Result};

/// Zero crossings of the sinc kernel kept on each side, measured at the lower of the two rates.
const HALF_ZEROS: f64 = 32.0;

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Band-limited resampling with a Hann-windowed sinc kernel.
///
/// The cutoff sits at the lower Nyquist frequency. Kernel taps are renormalized per output
/// sample, so DC passes through unchanged even near the edges.
pub fn resample(w: &Waveform, target_rate: u32) -> Result<Waveform> {
    if target_rate == 0 {
        return Err(Error::config("target sample rate must be positive"));
    }
    if target_rate == w.sample_rate {
        return Ok(w.clone());
    }
    let src = w.sample_rate as f64;
    let dst = target_rate as f64;
    let out_len = ((w.samples.len() as f64) * dst / src).round() as usize;
    let cutoff = (dst / src).min(1.0);
    let half_width = HALF_ZEROS / cutoff;
    let n = w.samples.len() as isize;

    let samples = (0..out_len)
        .map(|i| {
            let t = i as f64 * src / dst;
            let lo = ((t - half_width).ceil() as isize).max(0);
            let hi = ((t + half_width).floor() as isize).min(n - 1);
            let mut acc = 0.0;
            let mut norm = 0.0;
            for j in lo..=hi {
                let d = t - j as f64;
                let window = 0.5 * (1.0 + (PI * d / half_width).cos());
                let k = cutoff * sinc(cutoff * d) * window;
                acc += k * w.samples[j as usize];
                norm += k;
            }
            if norm.abs() > 1e-12 {
                acc / norm
            } else {
                0.0
            }
        })
        .collect();
    Waveform::new(samples, target_rate)
}
