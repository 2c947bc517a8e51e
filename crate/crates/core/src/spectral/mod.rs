//! STFT front end and per-bin standardization.

mod normalize;
mod stft;
mod tensor_file;

pub use normalize::{fit_normalizer, normalize, NormAccumulator, NormStats, NORM_EPSILON};
pub use stft::{frame_count, hann_window, stft, Stft};
pub use tensor_file::{decode_tensor, encode_tensor, read_tensor, spectrogram_to_csv, write_tensor, TENSOR_MAGIC, TENSOR_VERSION};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowFn {
    Hann,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MagnitudeScale {
    /// `10 log10(|X|^2 + 1e-10)`
    LogPower,
    /// `|X|`
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StftConfig {
    pub window_length: usize,
    pub hop_length: usize,
    pub freq_bins: usize,
    pub window_fn: WindowFn,
    pub center_pad: bool,
    pub magnitude_scale: MagnitudeScale,
}

impl Default for StftConfig {
    fn default() -> Self {
        StftConfig {
            window_length: 6144,
            hop_length: 4096,
            freq_bins: 192,
            window_fn: WindowFn::Hann,
            center_pad: true,
            magnitude_scale: MagnitudeScale::LogPower,
        }
    }
}

impl StftConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window_length == 0 {
            return Err(Error::config("window_length must be positive"));
        }
        if self.hop_length == 0 || self.hop_length > self.window_length {
            return Err(Error::config(format!(
                "hop_length {} must be in 1..={}",
                self.hop_length, self.window_length
            )));
        }
        let max_bins = self.window_length / 2 + 1;
        if self.freq_bins == 0 || self.freq_bins > max_bins {
            return Err(Error::config(format!("freq_bins {} must be in 1..={max_bins}", self.freq_bins)));
        }
        Ok(())
    }

    /// Frame count for a signal of `len` samples, or `None` if the signal is too short.
    pub fn frames_for(&self, len: usize) -> Option<usize> {
        frame_count(len, self.window_length, self.hop_length, self.center_pad)
    }
}

/// Frequency x time plane.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    /// `[freq_bins, frames]`
    pub values: Array2<f64>,
    pub config: StftConfig,
    pub source_id: String,
    pub offset_seconds: f64,
}

impl Spectrogram {
    pub fn freq_bins(&self) -> usize {
        self.values.nrows()
    }

    pub fn frames(&self) -> usize {
        self.values.ncols()
    }

    /// Wrap a bare plane, e.g. for tests or already-normalized inputs.
    pub fn from_values(values: Array2<f64>) -> Self {
        let config = StftConfig { freq_bins: values.nrows().max(1), ..StftConfig::default() };
        Spectrogram { values, config, source_id: String::new(), offset_seconds: 0.0 }
    }
}
