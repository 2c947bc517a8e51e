use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{aggregate, run_seed, Aggregate};
use crate::dataset::{prepare, SegmentCorpus};
use crate::error::{Error, Result};
use crate::model::{build_model, train, ModelConfig, TrainConfig};
use crate::spectral::StftConfig;

/// Candidate STFT settings. The defaults cover the neighbourhood of 6144/4096/192; the exact
/// candidate sets behind the published search are not fully known, so every list is
/// configurable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub windows: Vec<usize>,
    pub hops: Vec<usize>,
    pub bins_list: Vec<usize>,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            windows: vec![2048, 4096, 6144, 8192],
            hops: vec![1024, 2048, 4096, 6144],
            bins_list: vec![48, 96, 192],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CellOutcome {
    /// Validation accuracy of the best epoch, aggregated over runs.
    Done { val_accuracy: Aggregate },
    Skipped { reason: String },
    Failed { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub window: usize,
    pub hop: usize,
    pub bins: usize,
    pub seed: u64,
    pub outcome: CellOutcome,
}

/// Cells ordered by bins, then hop, then window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub spec: GridSpec,
    pub cells: Vec<GridCell>,
}

impl GridResult {
    /// Table for one bins value: rows are hops, columns are windows.
    pub fn table(&self, bins: usize) -> Option<Vec<Vec<&GridCell>>> {
        let b = self.spec.bins_list.iter().position(|&x| x == bins)?;
        let (nh, nw) = (self.spec.hops.len(), self.spec.windows.len());
        let block = &self.cells[b * nh * nw..(b + 1) * nh * nw];
        Some(block.chunks(nw).map(|row| row.iter().collect()).collect())
    }

    /// The completed cell with the highest mean validation accuracy (first on ties).
    pub fn best(&self) -> Option<&GridCell> {
        self.cells
            .iter()
            .filter_map(|c| match &c.outcome {
                CellOutcome::Done { val_accuracy } => Some((c, val_accuracy.mean)),
                _ => None,
            })
            .fold(None, |best: Option<(&GridCell, f64)>, (c, m)| match best {
                Some((_, bm)) if bm >= m => best,
                _ => Some((c, m)),
            })
            .map(|(c, _)| c)
    }
}

/// Seed of one grid cell, derived from the base seed and the cell coordinates.
pub fn cell_seed(base: u64, window: usize, hop: usize, bins: usize) -> u64 {
    let mut z = base;
    for v in [window as u64, hop as u64, bins as u64] {
        z = (z ^ v).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        z ^= z >> 29;
    }
    z
}

fn skip_reason(cfg: &StftConfig, segment_len: usize, model: &ModelConfig) -> Option<String> {
    if cfg.hop_length > cfg.window_length {
        return Some(format!("hop {} exceeds window {}", cfg.hop_length, cfg.window_length));
    }
    if let Err(e) = cfg.validate() {
        return Some(e.to_string());
    }
    let Some(frames) = cfg.frames_for(segment_len) else {
        return Some(format!("segment of {segment_len} samples is shorter than window {}", cfg.window_length));
    };
    if frames < model.pool.cols || cfg.freq_bins < model.pool.rows {
        return Some(format!(
            "{}x{} spectrogram is smaller than the {}x{} pooling window",
            cfg.freq_bins, frames, model.pool.rows, model.pool.cols
        ));
    }
    None
}

fn run_cell(corpus: &SegmentCorpus, cfg: &StftConfig, model: ModelConfig, train_cfg: &TrainConfig, seed: u64) -> Result<Aggregate> {
    let data = prepare(corpus, cfg)?;
    let (f, t) = data.input_dims();
    let model = model.with_input(f, t);
    let mut accs = Vec::with_capacity(train_cfg.num_runs);
    for run in 0..train_cfg.num_runs {
        let s = run_seed(seed, run);
        let (_, history) = train(build_model(model, s)?, &data.train, &data.val, &TrainConfig { seed: s, ..*train_cfg })?;
        accs.push(history.best().val_acc);
    }
    aggregate(&accs)
}

/// Train `model` for every (window, hop, bins) combination and record validation accuracy.
/// Invalid combinations are marked skipped and training errors are recorded per cell, so
/// the result always has `|windows| * |hops|` cells for each bins value.
pub fn grid_search(
    spec: &GridSpec,
    corpus: &SegmentCorpus,
    base: &StftConfig,
    model: ModelConfig,
    train_cfg: &TrainConfig,
    base_seed: u64,
) -> Result<GridResult> {
    if spec.windows.is_empty() || spec.hops.is_empty() || spec.bins_list.is_empty() {
        return Err(Error::config("grid needs at least one window, hop and bins value"));
    }
    train_cfg.validate()?;
    let coords: Vec<(usize, usize, usize)> = spec
        .bins_list
        .iter()
        .flat_map(|&b| spec.hops.iter().flat_map(move |&h| spec.windows.iter().map(move |&w| (w, h, b))))
        .collect();
    let segment_len = corpus.segment_len();
    let cells = coords
        .par_iter()
        .map(|&(window, hop, bins)| {
            let cfg = StftConfig { window_length: window, hop_length: hop, freq_bins: bins, ..*base };
            let seed = cell_seed(base_seed, window, hop, bins);
            let outcome = match skip_reason(&cfg, segment_len, &model) {
                Some(reason) => CellOutcome::Skipped { reason },
                None => match run_cell(corpus, &cfg, model, train_cfg, seed) {
                    Ok(val_accuracy) => CellOutcome::Done { val_accuracy },
                    Err(e) => CellOutcome::Failed { reason: e.to_string() },
                },
            };
            GridCell { window, hop, bins, seed, outcome }
        })
        .collect();
    Ok(GridResult { spec: spec.clone(), cells })
}
