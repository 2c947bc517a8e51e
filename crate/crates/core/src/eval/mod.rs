//! Metrics, aggregation over runs, the STFT grid search and report files.

mod confusion;
mod grid;
mod report;

pub use confusion::{confusion, ConfusionMatrix};
pub use grid::{cell_seed, grid_search, CellOutcome, GridCell, GridResult, GridSpec};
pub use report::{confusion_csv, grid_tables, report, ReportInput, RunSummary, VariantSummary, REPORT_FILES};

pub use crate::model::count_parameters;

use serde::{Deserialize, Serialize};

use crate::dataset::PreparedData;
use crate::error::{Error, Result};
use crate::model::{build_model, evaluate, train, ModelConfig, ModelVariant, TrainConfig, TrainHistory};

/// Accuracy summary of one evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub per_class: Vec<f64>,
    pub samples: usize,
}

impl Metrics {
    /// Per-class accuracy is recall: correct predictions over true members of the class. A
    /// class with no samples reports 0.
    pub fn from_confusion(cm: &ConfusionMatrix) -> Metrics {
        let per_class = (0..cm.classes())
            .map(|t| {
                let total = cm.true_count(t);
                if total == 0 { 0.0 } else { cm.counts[t][t] as f64 / total as f64 }
            })
            .collect();
        Metrics { accuracy: cm.accuracy(), per_class, samples: cm.total() as usize }
    }
}

/// Mean and sample standard deviation (n - 1 denominator; a single run has std 0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

pub fn aggregate(values: &[f64]) -> Result<Aggregate> {
    if values.is_empty() {
        return Err(Error::Data("cannot aggregate an empty list".into()));
    }
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let std = if n < 2 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    };
    Ok(Aggregate { mean, std, n })
}

/// Seed of run `run` in a multi-run experiment starting at `base`.
pub fn run_seed(base: u64, run: usize) -> u64 {
    base.wrapping_add(run as u64)
}

/// Result of one train-then-test run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub seed: u64,
    pub model: ModelVariant,
    pub history: TrainHistory,
    pub test: Metrics,
    pub confusion: ConfusionMatrix,
}

/// Build a model from `config` with `seed`, train it with batch shuffling also seeded by `seed`,
/// and score the best-epoch model on the test split.
pub fn train_and_test(data: &PreparedData, config: ModelConfig, train_cfg: &TrainConfig, seed: u64) -> Result<RunOutcome> {
    let (f, t) = data.input_dims();
    let config = config.with_input(f, t);
    let model = build_model(config, seed)?;
    let cfg = TrainConfig { seed, ..*train_cfg };
    let (model, history) = train(model, &data.train, &data.val, &cfg)?;
    let eval = evaluate(&model, &data.test)?;
    let cm = confusion(&eval.predictions, &data.test.labels, data.class_names.len())?;
    Ok(RunOutcome { seed, model, history, test: Metrics::from_confusion(&cm), confusion: cm })
}
