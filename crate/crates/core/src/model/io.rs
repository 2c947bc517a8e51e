//! Checkpoint files: a binary named-tensor container plus a JSON sidecar describing how the
//! model and its inputs were configured.

use std::path::{Path, PathBuf};

use ndarray::{ArrayD, IxDyn};
use serde::{Deserialize, Serialize};

use super::{build_model, ModelConfig, ModelVariant, TrainConfig};
use crate::error::{Error, Result};
use crate::nehd::checkpoint::Checkpoint;
use crate::spectral::{NormStats, StftConfig};

pub const SIDECAR_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub version: u32,
    pub model: ModelConfig,
    pub stft: StftConfig,
    pub sample_rate: u32,
    pub segment_seconds: f64,
    pub class_names: Vec<String>,
    pub model_seed: u64,
    pub train: Option<TrainConfig>,
    pub manifest_hash: Option<String>,
}

fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

/// Write `path` (binary) and `path` with a `.json` extension (sidecar).
pub fn save_checkpoint(path: &Path, model: &ModelVariant, norm: &NormStats, meta: &CheckpointMeta) -> Result<()> {
    let mut ckpt = Checkpoint::default();
    for (name, t) in model.parameters() {
        ckpt.push(name, t.to_owned());
    }
    ckpt.push("norm.mean", ArrayD::from_shape_vec(IxDyn(&[norm.mean.len()]), norm.mean.clone()).expect("1-d"));
    ckpt.push("norm.std", ArrayD::from_shape_vec(IxDyn(&[norm.std.len()]), norm.std.clone()).expect("1-d"));
    ckpt.write(path)?;
    let json = serde_json::to_string_pretty(meta).expect("meta serializes");
    let side = sidecar_path(path);
    std::fs::write(&side, json + "\n").map_err(|e| Error::io(side, e))
}

pub fn load_checkpoint(path: &Path) -> Result<(ModelVariant, NormStats, CheckpointMeta)> {
    let side = sidecar_path(path);
    let text = std::fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
    let meta: CheckpointMeta = serde_json::from_str(&text)
        .map_err(|source| Error::Json { context: format!("checkpoint sidecar {}", side.display()), source })?;
    if meta.version != SIDECAR_VERSION {
        return Err(Error::Version { what: "checkpoint sidecar", found: meta.version, expected: SIDECAR_VERSION });
    }
    let ckpt = Checkpoint::read(path)?;
    let mut model = build_model(meta.model, meta.model_seed)?;
    let names: Vec<&'static str> = model.parameters().iter().map(|(n, _)| *n).collect();
    for (name, mut slot) in names.into_iter().zip(model.parameters_mut()) {
        let t = ckpt.get(name).ok_or_else(|| Error::Data(format!("checkpoint lacks tensor {name}")))?;
        if t.shape() != slot.shape() {
            return Err(Error::shape(format!("tensor {name}: checkpoint {:?}, model {:?}", t.shape(), slot.shape())));
        }
        slot.assign(t);
    }
    let vec_of = |name: &str| -> Result<Vec<f64>> {
        Ok(ckpt.get(name).ok_or_else(|| Error::Data(format!("checkpoint lacks {name}")))?.iter().copied().collect())
    };
    let norm = NormStats { mean: vec_of("norm.mean")?, std: vec_of("norm.std")? };
    Ok((model, norm, meta))
}
