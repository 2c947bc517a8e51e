//! Neural edge histogram descriptors for passive-sonar spectrogram classification.
//!
//! The pipeline runs audio through [`ingest`] (decode, resample, segment, split), [`spectral`]
//! (STFT and per-bin standardization), the learnable texture layers in [`nehd`], and the
//! classifiers and training loop in [`model`]. [`eval`] holds metrics, parameter accounting,
//! the STFT grid search and report writing; [`synth`] generates a labelled desk-scale corpus.

pub mod dataset;
pub mod error;
pub mod eval;
pub mod ingest;
pub mod model;
pub mod nehd;
pub mod spectral;
pub mod synth;

pub use error::{Error, Result};
pub use ingest::{DatasetManifest, Segment, Split, Waveform};
pub use model::{ModelConfig, ModelKind, ModelVariant, TrainConfig, TrainHistory};
pub use spectral::{NormStats, Spectrogram, StftConfig};
