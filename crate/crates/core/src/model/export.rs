use ndarray::{s, Array3, ArrayView2};

use super::{ModelKind, ModelVariant};
use crate::error::{Error, Result};

/// Stack the normalized spectrogram with the histogram maps of a trained NEHD model.
///
/// Output is `[1 + bins, freq_bins, frames]`: channel 0 is the input unchanged, the remaining
/// channels are the pooled histogram maps upsampled back to the input grid by nearest
/// neighbour (rows/cols past the last full pooling window reuse the last pooled cell).
pub fn export_features(model: &ModelVariant, spec: ArrayView2<f64>) -> Result<Array3<f64>> {
    if model.config.kind != ModelKind::Nehd {
        return Err(Error::config(format!("feature export needs a nehd model, got {}", model.config.kind)));
    }
    let hist = model.texture_features(spec)?;
    let (bins, pr, pc) = hist.dim();
    let (rows, cols) = spec.dim();
    let pool = model.config.pool;
    let mut out = Array3::zeros((bins + 1, rows, cols));
    out.slice_mut(s![0, .., ..]).assign(&spec);
    for b in 0..bins {
        for r in 0..rows {
            let hr = (r / pool.rows).min(pr - 1);
            for c in 0..cols {
                out[[b + 1, r, c]] = hist[[b, hr, (c / pool.cols).min(pc - 1)]];
            }
        }
    }
    Ok(out)
}
