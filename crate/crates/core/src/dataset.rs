//! In-memory datasets: manifest -> segments -> normalized spectrograms.

use std::path::Path;

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ingest::{load_segments, DatasetManifest, Segment, Split};
use crate::spectral::{fit_normalizer, normalize, NormStats, Spectrogram, Stft, StftConfig};

/// Inputs with labels and `(source_id, offset_seconds)` keys, in a stable order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabeledSet {
    pub inputs: Vec<Array2<f64>>,
    pub labels: Vec<usize>,
    pub keys: Vec<(String, f64)>,
}

impl LabeledSet {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn views(&self) -> Vec<ArrayView2<'_, f64>> {
        self.inputs.iter().map(|x| x.view()).collect()
    }

    /// The first `n` samples.
    pub fn take(&self, n: usize) -> LabeledSet {
        let n = n.min(self.len());
        LabeledSet {
            inputs: self.inputs[..n].to_vec(),
            labels: self.labels[..n].to_vec(),
            keys: self.keys[..n].to_vec(),
        }
    }
}

/// Segmented audio for every split.
#[derive(Debug, Clone)]
pub struct SegmentCorpus {
    pub class_names: Vec<String>,
    pub sample_rate: u32,
    pub segment_seconds: f64,
    pub train: Vec<Segment>,
    pub val: Vec<Segment>,
    pub test: Vec<Segment>,
}

impl SegmentCorpus {
    pub fn split(&self, split: Split) -> &[Segment] {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }

    pub fn segment_len(&self) -> usize {
        (self.segment_seconds * self.sample_rate as f64).round() as usize
    }
}

/// Decode, resample and segment every manifest entry. Entries are processed in parallel; the
/// output keeps manifest order.
pub fn load_corpus(manifest: &DatasetManifest, base: &Path, sample_rate: u32, segment_seconds: f64) -> Result<SegmentCorpus> {
    let load = |split: Split| -> Result<Vec<Segment>> {
        let entries: Vec<_> = manifest.split(split).collect();
        let nested = entries
            .par_iter()
            .map(|e| load_segments(manifest, base, e, sample_rate, segment_seconds))
            .collect::<Result<Vec<_>>>()?;
        Ok(nested.into_iter().flatten().collect())
    };
    Ok(SegmentCorpus {
        class_names: manifest.class_names.clone(),
        sample_rate,
        segment_seconds,
        train: load(Split::Train)?,
        val: load(Split::Val)?,
        test: load(Split::Test)?,
    })
}

pub fn spectrograms(segments: &[Segment], cfg: &StftConfig) -> Result<Vec<Spectrogram>> {
    let stft = Stft::new(*cfg)?;
    segments.par_iter().map(|s| stft.segment(s)).collect()
}

fn labeled(specs: &[Spectrogram], segments: &[Segment], norm: &NormStats) -> Result<LabeledSet> {
    let mut set = LabeledSet::default();
    for (spec, seg) in specs.iter().zip(segments) {
        set.inputs.push(normalize(spec, norm)?.values);
        set.labels.push(seg.label);
        set.keys.push((seg.source_id.clone(), seg.offset_seconds));
    }
    Ok(set)
}

/// Spectrograms of `segments` normalized with `norm`, in segment order.
pub fn labeled_segments(segments: &[Segment], cfg: &StftConfig, norm: &NormStats) -> Result<LabeledSet> {
    labeled(&spectrograms(segments, cfg)?, segments, norm)
}

/// Normalized spectrograms for all splits; statistics are fitted on the training split only.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub train: LabeledSet,
    pub val: LabeledSet,
    pub test: LabeledSet,
    pub norm: NormStats,
    pub stft: StftConfig,
    pub class_names: Vec<String>,
}

impl PreparedData {
    pub fn split(&self, split: Split) -> &LabeledSet {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }

    /// `(freq_bins, frames)` of every input.
    pub fn input_dims(&self) -> (usize, usize) {
        self.train.inputs.first().map_or((0, 0), |x| x.dim())
    }
}

pub fn prepare(corpus: &SegmentCorpus, cfg: &StftConfig) -> Result<PreparedData> {
    if corpus.train.is_empty() {
        return Err(Error::Data("training split has no segments".into()));
    }
    let train = spectrograms(&corpus.train, cfg)?;
    let norm = fit_normalizer(&train)?;
    prepare_with(corpus, cfg, norm, Some(train))
}

/// Like [`prepare`] but with fixed normalization statistics (e.g. from a checkpoint).
pub fn prepare_with(corpus: &SegmentCorpus, cfg: &StftConfig, norm: NormStats, train: Option<Vec<Spectrogram>>) -> Result<PreparedData> {
    let train_specs = match train {
        Some(t) => t,
        None => spectrograms(&corpus.train, cfg)?,
    };
    let val_specs = spectrograms(&corpus.val, cfg)?;
    let test_specs = spectrograms(&corpus.test, cfg)?;
    Ok(PreparedData {
        train: labeled(&train_specs, &corpus.train, &norm)?,
        val: labeled(&val_specs, &corpus.val, &norm)?,
        test: labeled(&test_specs, &corpus.test, &norm)?,
        norm,
        stft: *cfg,
        class_names: corpus.class_names.clone(),
    })
}
