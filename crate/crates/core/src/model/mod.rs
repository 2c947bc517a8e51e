//! The four ablation models, their training loop and feature export.
//!
//! Every variant ends in the same affine classifier over flattened features, so accuracy
//! differences isolate the feature layers:
//!
//! | kind             | features                                                    |
//! |------------------|-------------------------------------------------------------|
//! | `linear`         | the normalized spectrogram itself                           |
//! | `edge_only`      | edge block (`B` edges + no-edge), average-pooled `S x T`    |
//! | `histogram_only` | per-channel histogram layer applied to the spectrogram      |
//! | `nehd`           | edge block followed by the mixed histogram layer            |

mod adam;
mod classifier;
mod export;
mod io;
mod loss;
mod train;

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, Array3, ArrayView2, ArrayViewD, ArrayViewMutD, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use adam::{adam_step, AdamConfig, AdamState};
pub use classifier::Classifier;
pub use export::export_features;
pub use io::{load_checkpoint, save_checkpoint, CheckpointMeta, SIDECAR_VERSION};
pub use loss::cross_entropy;
pub use train::{evaluate, train, EpochRecord, Evaluation, TrainConfig, TrainHistory};

use crate::error::{Error, Result};
use crate::nehd::{
    avg_pool, avg_pool_backward, init_edge_filters, init_histogram, EdgeCache, EdgeInit, EdgeParams, HistCache,
    HistInit, HistogramParams, PoolWindow, Wiring,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Linear,
    EdgeOnly,
    HistogramOnly,
    Nehd,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::Linear, ModelKind::EdgeOnly, ModelKind::HistogramOnly, ModelKind::Nehd];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Linear => "linear",
            ModelKind::EdgeOnly => "edge_only",
            ModelKind::HistogramOnly => "histogram_only",
            ModelKind::Nehd => "nehd",
        }
    }

    fn has_edges(self) -> bool {
        matches!(self, ModelKind::EdgeOnly | ModelKind::Nehd)
    }

    fn has_histogram(self) -> bool {
        matches!(self, ModelKind::HistogramOnly | ModelKind::Nehd)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "linear" | "linear_baseline" | "baseline" => Ok(ModelKind::Linear),
            "edge_only" | "edge" | "edges" | "structural" => Ok(ModelKind::EdgeOnly),
            "histogram_only" | "histogram" | "hist" | "statistical" => Ok(ModelKind::HistogramOnly),
            "nehd" => Ok(ModelKind::Nehd),
            other => Err(Error::config(format!("unknown model variant {other:?}"))),
        }
    }
}

/// Architecture of a model variant. Defaults: 8 Sobel edges, 8 bins, 4x2 pooling, bins
/// initialized over [-3, 3], a 192x12 input and 4 classes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub freq_bins: usize,
    pub frames: usize,
    pub classes: usize,
    pub edges: usize,
    pub edge_init: EdgeInit,
    pub bins: usize,
    pub pool: PoolWindow,
    pub hist_init: HistInit,
}

impl ModelConfig {
    pub fn new(kind: ModelKind) -> Self {
        ModelConfig {
            kind,
            freq_bins: 192,
            frames: 12,
            classes: 4,
            edges: 8,
            edge_init: EdgeInit::Sobel,
            bins: 8,
            pool: PoolWindow::new(4, 2),
            hist_init: HistInit::default(),
        }
    }

    pub fn with_input(mut self, freq_bins: usize, frames: usize) -> Self {
        self.freq_bins = freq_bins;
        self.frames = frames;
        self
    }

    /// Length of the flattened feature vector fed to the classifier.
    pub fn feature_len(&self) -> Result<usize> {
        self.validate()?;
        let (r, c) = self.pool.output_dims(self.freq_bins, self.frames)?;
        Ok(match self.kind {
            ModelKind::Linear => self.freq_bins * self.frames,
            ModelKind::EdgeOnly => (self.edges + 1) * r * c,
            ModelKind::HistogramOnly | ModelKind::Nehd => self.bins * r * c,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.freq_bins == 0 || self.frames == 0 {
            return Err(Error::config(format!("input plane {}x{} is empty", self.freq_bins, self.frames)));
        }
        if self.classes < 2 {
            return Err(Error::config("need at least two classes"));
        }
        if self.kind.has_edges() && self.edges == 0 {
            return Err(Error::config("edge count must be positive"));
        }
        if self.kind.has_histogram() && self.bins == 0 {
            return Err(Error::config("bin count must be positive"));
        }
        if self.kind != ModelKind::Linear {
            self.pool.output_dims(self.freq_bins, self.frames)?;
        }
        Ok(())
    }
}

/// Per-sample activations needed for the backward pass.
#[derive(Debug, Clone)]
pub struct SampleCache {
    features: Array1<f64>,
    edge: Option<EdgeCache>,
    edge_dims: Option<(usize, usize, usize)>,
    hist: Option<HistCache>,
}

/// Gradients aligned with [`ModelVariant::parameters`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients(pub Vec<Vec<f64>>);

impl Gradients {
    fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for t in &mut self.0 {
            t.iter_mut().for_each(|v| *v *= factor);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelVariant {
    pub config: ModelConfig,
    pub edge: Option<EdgeParams>,
    pub histogram: Option<HistogramParams>,
    pub classifier: Classifier,
}

fn check_finite<D: ndarray::Dimension>(a: &ndarray::Array<f64, D>, layer: &'static str) -> Result<()> {
    if a.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { layer })
    }
}

fn sub_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministically initialize a model: Glorot-uniform classifier with zero bias, edge and
/// histogram layers per the config.
pub fn build_model(config: ModelConfig, seed: u64) -> Result<ModelVariant> {
    let features = config.feature_len()?;
    let edge = if config.kind.has_edges() {
        Some(init_edge_filters(config.edge_init, config.edges, sub_seed(seed, 1))?)
    } else {
        None
    };
    let histogram = match config.kind {
        ModelKind::HistogramOnly => Some(init_histogram(config.bins, 1, Wiring::PerChannel, config.hist_init, config.pool)?),
        ModelKind::Nehd => Some(init_histogram(config.bins, config.edges + 1, Wiring::Mixed, config.hist_init, config.pool)?),
        _ => None,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(seed, 2));
    let classifier = Classifier::glorot(features, config.classes, &mut rng);
    Ok(ModelVariant { config, edge, histogram, classifier })
}

impl ModelVariant {
    /// Named views of every learnable tensor, in a fixed order.
    pub fn parameters(&self) -> Vec<(&'static str, ArrayViewD<'_, f64>)> {
        let mut out = Vec::new();
        if let Some(e) = &self.edge {
            out.push(("edge.weights", e.edge_filters.weights.view().into_dyn()));
            if let Some(b) = &e.edge_filters.bias {
                out.push(("edge.bias", b.view().into_dyn()));
            }
            out.push(("noedge.weights", e.noedge.weights.view().into_dyn()));
            out.push(("noedge.bias", e.noedge.bias.as_ref().expect("no-edge bias").view().into_dyn()));
        }
        if let Some(h) = &self.histogram {
            if let Some(a) = &h.mixing {
                out.push(("hist.mixing", a.view().into_dyn()));
            }
            out.push(("hist.centers", h.centers.view().into_dyn()));
            out.push(("hist.widths", h.widths.view().into_dyn()));
        }
        out.push(("classifier.weights", self.classifier.weights.view().into_dyn()));
        out.push(("classifier.bias", self.classifier.bias.view().into_dyn()));
        out
    }

    /// Mutable views in the same order as [`parameters`](Self::parameters).
    pub fn parameters_mut(&mut self) -> Vec<ArrayViewMutD<'_, f64>> {
        let mut out = Vec::new();
        if let Some(e) = &mut self.edge {
            out.push(e.edge_filters.weights.view_mut().into_dyn());
            if let Some(b) = &mut e.edge_filters.bias {
                out.push(b.view_mut().into_dyn());
            }
            out.push(e.noedge.weights.view_mut().into_dyn());
            out.push(e.noedge.bias.as_mut().expect("no-edge bias").view_mut().into_dyn());
        }
        if let Some(h) = &mut self.histogram {
            if let Some(a) = &mut h.mixing {
                out.push(a.view_mut().into_dyn());
            }
            out.push(h.centers.view_mut().into_dyn());
            out.push(h.widths.view_mut().into_dyn());
        }
        out.push(self.classifier.weights.view_mut().into_dyn());
        out.push(self.classifier.bias.view_mut().into_dyn());
        out
    }

    pub fn zero_gradients(&self) -> Gradients {
        Gradients(self.parameters().iter().map(|(_, t)| vec![0.0; t.len()]).collect())
    }

    /// Parameter counts grouped by layer.
    pub fn parameter_breakdown(&self) -> Vec<(&'static str, usize)> {
        let mut out = Vec::new();
        if let Some(e) = &self.edge {
            out.push(("edge_filters", e.edge_filters.num_parameters()));
            out.push(("noedge", e.noedge.num_parameters()));
        }
        if let Some(h) = &self.histogram {
            out.push(("histogram", h.num_parameters()));
        }
        out.push(("classifier", self.classifier.num_parameters()));
        out
    }

    pub fn num_parameters(&self) -> usize {
        self.parameters().iter().map(|(_, t)| t.len()).sum()
    }

    fn check_input(&self, x: &ArrayView2<f64>) -> Result<()> {
        let want = (self.config.freq_bins, self.config.frames);
        if x.dim() != want {
            return Err(Error::shape(format!("input {:?} but model expects {want:?}", x.dim())));
        }
        Ok(())
    }

    /// Texture feature maps ahead of flattening, plus the caches for backward.
    fn features_cached(&self, x: ArrayView2<f64>) -> Result<(Array3<f64>, SampleCache)> {
        self.check_input(&x)?;
        let x3 = x.insert_axis(Axis(0));
        let mut cache = SampleCache { features: Array1::zeros(0), edge: None, edge_dims: None, hist: None };
        let maps = match self.config.kind {
            ModelKind::Linear => x3.to_owned(),
            ModelKind::EdgeOnly => {
                let (e, ec) = self.edge.as_ref().expect("edge layer").forward_cached(x3)?;
                check_finite(&e, "edge")?;
                cache.edge_dims = Some(e.dim());
                cache.edge = Some(ec);
                avg_pool(e.view(), self.config.pool)?
            }
            ModelKind::HistogramOnly => {
                let (h, hc) = self.histogram.as_ref().expect("histogram layer").forward_cached(x3)?;
                check_finite(&h, "histogram")?;
                cache.hist = Some(hc);
                h
            }
            ModelKind::Nehd => {
                let (e, ec) = self.edge.as_ref().expect("edge layer").forward_cached(x3)?;
                check_finite(&e, "edge")?;
                let (h, hc) = self.histogram.as_ref().expect("histogram layer").forward_cached(e.view())?;
                check_finite(&h, "histogram")?;
                cache.edge = Some(ec);
                cache.hist = Some(hc);
                h
            }
        };
        Ok((maps, cache))
    }

    /// Texture feature maps for one spectrogram (pooled histogram or edge maps; the raw plane
    /// for the linear baseline).
    pub fn texture_features(&self, x: ArrayView2<f64>) -> Result<Array3<f64>> {
        Ok(self.features_cached(x)?.0)
    }

    pub fn forward_sample(&self, x: ArrayView2<f64>) -> Result<(Array1<f64>, SampleCache)> {
        let (maps, mut cache) = self.features_cached(x)?;
        let flat = Array1::from_iter(maps.iter().copied());
        let logits = self.classifier.forward(flat.view());
        check_finite(&logits, "classifier")?;
        cache.features = flat;
        Ok((logits, cache))
    }

    /// Logits for a batch, one row per input, in input order.
    pub fn forward(&self, batch: &[ArrayView2<f64>]) -> Result<Array2<f64>> {
        let rows = batch
            .par_iter()
            .map(|x| self.forward_sample(*x).map(|(l, _)| l))
            .collect::<Result<Vec<_>>>()?;
        let mut out = Array2::zeros((batch.len(), self.config.classes));
        for (i, r) in rows.into_iter().enumerate() {
            out.row_mut(i).assign(&r);
        }
        Ok(out)
    }

    /// Parameter gradients for one sample given `dL/d logits`.
    pub fn backward_sample(&self, cache: &SampleCache, grad_logits: ndarray::ArrayView1<f64>) -> Result<Gradients> {
        let (g_w, g_b, g_feat) = self.classifier.backward(cache.features.view(), grad_logits);
        let mut grads = Vec::new();
        match self.config.kind {
            ModelKind::Linear => {}
            ModelKind::EdgeOnly => {
                let dims = cache.edge_dims.expect("edge dims");
                let (_, r, c) = self.config.pool.output_dims(dims.1, dims.2).map(|(r, c)| (dims.0, r, c))?;
                let g_pooled = g_feat.into_shape_with_order((dims.0, r, c)).expect("feature length");
                let g_edge = avg_pool_backward(dims, self.config.pool, g_pooled.view())?;
                let eg = self.edge.as_ref().expect("edge layer").backward(cache.edge.as_ref().expect("edge cache"), g_edge.view())?;
                push_edge(&mut grads, eg);
            }
            ModelKind::HistogramOnly => {
                let h = self.histogram.as_ref().expect("histogram layer");
                let (r, c) = h.output_dims(self.config.freq_bins, self.config.frames)?;
                let g_maps = g_feat.into_shape_with_order((h.output_channels(), r, c)).expect("feature length");
                let hg = h.backward(cache.hist.as_ref().expect("hist cache"), g_maps.view())?;
                push_hist(&mut grads, hg);
            }
            ModelKind::Nehd => {
                let h = self.histogram.as_ref().expect("histogram layer");
                let (r, c) = h.output_dims(self.config.freq_bins, self.config.frames)?;
                let g_maps = g_feat.into_shape_with_order((h.output_channels(), r, c)).expect("feature length");
                let hg = h.backward(cache.hist.as_ref().expect("hist cache"), g_maps.view())?;
                let eg = self.edge.as_ref().expect("edge layer").backward(cache.edge.as_ref().expect("edge cache"), hg.input.view())?;
                push_edge(&mut grads, eg);
                push_hist(&mut grads, hg);
            }
        }
        grads.push(flat(g_w));
        grads.push(g_b.to_vec());
        Ok(Gradients(grads))
    }

    /// Mean cross-entropy over the batch and its parameter gradients.
    ///
    /// Samples are processed in parallel; the per-sample gradients are summed in batch order,
    /// so the result does not depend on the thread count.
    pub fn loss_and_gradients(&self, batch: &[ArrayView2<f64>], labels: &[usize]) -> Result<(f64, Gradients)> {
        if batch.len() != labels.len() || batch.is_empty() {
            return Err(Error::shape(format!("{} inputs for {} labels", batch.len(), labels.len())));
        }
        let n = batch.len() as f64;
        let per_sample = batch
            .par_iter()
            .zip(labels.par_iter())
            .map(|(x, &y)| -> Result<(f64, Gradients)> {
                let (logits, cache) = self.forward_sample(*x)?;
                let logits = logits.insert_axis(Axis(0));
                let (loss, g) = cross_entropy(logits.view(), &[y])?;
                let g = g.row(0).mapv(|v| v / n);
                Ok((loss, self.backward_sample(&cache, g.view())?))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut total = self.zero_gradients();
        let mut loss = 0.0;
        for (l, g) in &per_sample {
            loss += l;
            total.add_assign(g);
        }
        Ok((loss / n, total))
    }
}

fn push_edge(grads: &mut Vec<Vec<f64>>, eg: crate::nehd::EdgeGrads) {
    grads.push(flat(eg.edge_weights));
    if let Some(b) = eg.edge_bias {
        grads.push(b.to_vec());
    }
    grads.push(flat(eg.noedge_weights));
    grads.push(eg.noedge_bias.to_vec());
}

fn push_hist(grads: &mut Vec<Vec<f64>>, hg: crate::nehd::HistGrads) {
    if let Some(a) = hg.mixing {
        grads.push(flat(a));
    }
    grads.push(flat(hg.centers));
    grads.push(flat(hg.widths));
}

/// Total learnable parameters.
pub fn count_parameters(m: &ModelVariant) -> usize {
    m.num_parameters()
}

fn flat<D: ndarray::Dimension>(a: ndarray::Array<f64, D>) -> Vec<f64> {
    a.iter().copied().collect()
}
