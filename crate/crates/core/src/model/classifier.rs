use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng;

/// Affine map from flattened features to class logits.
#[derive(Debug, Clone, PartialEq)]
pub struct Classifier {
    /// `[classes, features]`
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Classifier {
    /// Glorot-uniform weights, zero bias.
    pub fn glorot(features: usize, classes: usize, rng: &mut impl Rng) -> Self {
        let limit = (6.0 / (features + classes) as f64).sqrt();
        Classifier {
            weights: Array2::from_shape_simple_fn((classes, features), || rng.random_range(-limit..=limit)),
            bias: Array1::zeros(classes),
        }
    }

    pub fn num_parameters(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    pub fn forward(&self, features: ArrayView1<f64>) -> Array1<f64> {
        self.weights.dot(&features) + &self.bias
    }

    /// Returns `(dW, db, dfeatures)`.
    pub fn backward(&self, features: ArrayView1<f64>, grad_logits: ArrayView1<f64>) -> (Array2<f64>, Array1<f64>, Array1<f64>) {
        let g_w = Array2::from_shape_fn(self.weights.dim(), |(c, f)| grad_logits[c] * features[f]);
        let g_x = self.weights.t().dot(&grad_logits);
        (g_w, grad_logits.to_owned(), g_x)
    }
}
