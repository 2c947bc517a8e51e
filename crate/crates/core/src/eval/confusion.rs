use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Counts with predicted classes along rows and true labels along columns:
/// `counts[predicted][truth]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn zeros(classes: usize) -> Self {
        ConfusionMatrix { counts: vec![vec![0; classes]; classes] }
    }

    pub fn classes(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes()).map(|i| self.counts[i][i]).sum()
    }

    /// Column sum: the number of samples whose true label is `class`.
    pub fn true_count(&self, class: usize) -> u64 {
        self.counts.iter().map(|row| row[class]).sum()
    }

    pub fn accuracy(&self) -> f64 {
        let total = self.total();
        if total == 0 { 0.0 } else { self.trace() as f64 / total as f64 }
    }

    /// Each row scaled to percentages of its sum; empty rows stay zero.
    pub fn row_normalized(&self) -> Vec<Vec<f64>> {
        self.counts
            .iter()
            .map(|row| {
                let s: u64 = row.iter().sum();
                row.iter().map(|&c| if s == 0 { 0.0 } else { 100.0 * c as f64 / s as f64 }).collect()
            })
            .collect()
    }

    /// Element-wise sum of matrices of the same size.
    pub fn sum<'a>(mats: impl IntoIterator<Item = &'a ConfusionMatrix>) -> Option<ConfusionMatrix> {
        let mut it = mats.into_iter();
        let mut acc = it.next()?.clone();
        for m in it {
            for (ra, rb) in acc.counts.iter_mut().zip(&m.counts) {
                for (a, b) in ra.iter_mut().zip(rb) {
                    *a += b;
                }
            }
        }
        Some(acc)
    }
}

pub fn confusion(preds: &[usize], labels: &[usize], classes: usize) -> Result<ConfusionMatrix> {
    if preds.len() != labels.len() {
        return Err(Error::shape(format!("{} predictions for {} labels", preds.len(), labels.len())));
    }
    let mut cm = ConfusionMatrix::zeros(classes);
    for (&p, &t) in preds.iter().zip(labels) {
        if p >= classes || t >= classes {
            return Err(Error::Data(format!("class index out of range 0..{classes}: predicted {p}, label {t}")));
        }
        cm.counts[p][t] += 1;
    }
    Ok(cm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn perfect_predictions_give_identity() {
        let cm = confusion(&[0, 1, 2, 3], &[0, 1, 2, 3], 4).unwrap();
        for p in 0..4 {
            for t in 0..4 {
                assert_eq!(cm.counts[p][t], u64::from(p == t));
            }
        }
    }

    #[test]
    fn constant_prediction_fills_first_row() {
        let labels: Vec<usize> = (0..40).map(|i| i % 4).collect();
        let cm = confusion(&vec![0; 40], &labels, 4).unwrap();
        assert_eq!(cm.counts[0], vec![10; 4]);
        assert!(cm.counts[1..].iter().flatten().all(|&c| c == 0));
        assert_eq!(cm.row_normalized()[0], vec![25.0; 4]);
    }

    #[test]
    fn accuracy_matches_direct_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let labels: Vec<usize> = (0..1000).map(|_| rng.random_range(0..4)).collect();
        let preds: Vec<usize> = labels.iter().map(|&l| if rng.random_bool(0.6) { l } else { rng.random_range(0..4) }).collect();
        let direct = preds.iter().zip(&labels).filter(|(p, l)| p == l).count() as f64 / 1000.0;
        let cm = confusion(&preds, &labels, 4).unwrap();
        assert!((cm.accuracy() - direct).abs() < 1e-12);
        for c in 0..4 {
            assert_eq!(cm.true_count(c), labels.iter().filter(|&&l| l == c).count() as u64);
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(confusion(&[4], &[0], 4).is_err());
        assert!(confusion(&[0], &[0, 1], 4).is_err());
    }
}
