use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

/// Mean softmax cross-entropy and its gradient `(softmax - onehot) / batch`.
pub fn cross_entropy(logits: ArrayView2<f64>, labels: &[usize]) -> Result<(f64, Array2<f64>)> {
    let (n, classes) = logits.dim();
    if n != labels.len() || n == 0 {
        return Err(Error::shape(format!("{n} logit rows for {} labels", labels.len())));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= classes) {
        return Err(Error::Label { label: bad, classes });
    }
    let mut grad = Array2::zeros((n, classes));
    let mut loss = 0.0;
    for (i, row) in logits.rows().into_iter().enumerate() {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let sum: f64 = row.iter().map(|v| (v - max).exp()).sum();
        let log_z = max + sum.ln();
        loss += log_z - row[labels[i]];
        for c in 0..classes {
            let p = (row[c] - log_z).exp();
            grad[[i, c]] = (p - if c == labels[i] { 1.0 } else { 0.0 }) / n as f64;
        }
    }
    Ok((loss / n as f64, grad))
}
