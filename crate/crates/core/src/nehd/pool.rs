use ndarray::{Array3, ArrayView3};

use super::PoolWindow;
use crate::error::{Error, Result};

/// Non-overlapping average pooling; rows/cols beyond the last full window are dropped.
pub fn avg_pool(x: ArrayView3<f64>, pool: PoolWindow) -> Result<Array3<f64>> {
    let (c, rows, cols) = x.dim();
    let (out_r, out_c) = pool.output_dims(rows, cols)?;
    let scale = 1.0 / (pool.rows * pool.cols) as f64;
    Ok(Array3::from_shape_fn((c, out_r, out_c), |(k, pr, pc)| {
        let mut acc = 0.0;
        for r in pr * pool.rows..(pr + 1) * pool.rows {
            for q in pc * pool.cols..(pc + 1) * pool.cols {
                acc += x[[k, r, q]];
            }
        }
        acc * scale
    }))
}

/// Spread `upstream` back over an input of `input_dims`.
pub fn avg_pool_backward(input_dims: (usize, usize, usize), pool: PoolWindow, upstream: ArrayView3<f64>) -> Result<Array3<f64>> {
    let (c, rows, cols) = input_dims;
    let (out_r, out_c) = pool.output_dims(rows, cols)?;
    if upstream.dim() != (c, out_r, out_c) {
        return Err(Error::shape(format!("upstream {:?} vs pooled {:?}", upstream.dim(), (c, out_r, out_c))));
    }
    let scale = 1.0 / (pool.rows * pool.cols) as f64;
    Ok(Array3::from_shape_fn(input_dims, |(k, r, q)| {
        let (pr, pc) = (r / pool.rows, q / pool.cols);
        if pr < out_r && pc < out_c {
            upstream[[k, pr, pc]] * scale
        } else {
            0.0
        }
    }))
}
