use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{aggregate, Aggregate, CellOutcome, ConfusionMatrix, GridResult, Metrics};
use crate::error::{Error, Result};
use crate::model::ModelKind;

/// Files always written by [`report`]; confusion and grid files are added per variant / bins.
pub const REPORT_FILES: [&str; 4] = ["accuracy.csv", "parameters.csv", "feature_extractor.csv", "summary.json"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub metrics: Metrics,
    pub confusion: ConfusionMatrix,
    pub best_epoch: usize,
    pub epochs_run: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantSummary {
    pub kind: ModelKind,
    /// Learnable element count per named tensor.
    pub parameters: Vec<(String, usize)>,
    pub runs: Vec<RunSummary>,
}

impl VariantSummary {
    pub fn total_parameters(&self) -> usize {
        self.parameters.iter().map(|(_, n)| n).sum()
    }

    /// Parameters outside the final classifier.
    pub fn texture_parameters(&self) -> usize {
        self.parameters.iter().filter(|(name, _)| !name.starts_with("classifier.")).map(|(_, n)| n).sum()
    }

    pub fn accuracy(&self) -> Result<Aggregate> {
        aggregate(&self.runs.iter().map(|r| r.metrics.accuracy).collect::<Vec<_>>())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportInput {
    pub tool_version: String,
    pub class_names: Vec<String>,
    pub variants: Vec<VariantSummary>,
    pub grid: Option<GridResult>,
    pub config_hash: String,
    pub manifest_hash: Option<String>,
    pub seeds: Vec<u64>,
}

#[derive(Serialize)]
struct SummaryVariant<'a> {
    variant: &'a str,
    runs: usize,
    mean_accuracy: f64,
    std_accuracy: f64,
    parameters: usize,
}

#[derive(Serialize)]
struct Summary<'a> {
    tool_version: &'a str,
    config_hash: &'a str,
    manifest_hash: Option<&'a str>,
    seeds: &'a [u64],
    class_names: &'a [String],
    variants: Vec<SummaryVariant<'a>>,
    best_grid_cell: Option<[usize; 3]>,
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn write(dir: &Path, name: &str, contents: &str, written: &mut Vec<PathBuf>) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
    written.push(path);
    Ok(())
}

/// Matrix as CSV with class-name headers; rows are predictions, columns true labels.
pub fn confusion_csv<T: std::fmt::Display>(classes: &[String], rows: &[Vec<T>]) -> String {
    let mut s = String::from("predicted\\true");
    for c in classes {
        let _ = write!(s, ",{}", csv_field(c));
    }
    s.push('\n');
    for (name, row) in classes.iter().zip(rows) {
        s.push_str(&csv_field(name));
        for v in row {
            let _ = write!(s, ",{v}");
        }
        s.push('\n');
    }
    s
}

/// One `grid_bins<bins>.csv` table per bins value: rows are hops, columns are windows, cells
/// hold mean validation accuracy or the reason the cell was not trained.
pub fn grid_tables(grid: &GridResult) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for &bins in &grid.spec.bins_list {
        let table = grid.table(bins).ok_or_else(|| Error::shape("grid result does not match its grid settings"))?;
        let mut s = String::from("hop\\window");
        for w in &grid.spec.windows {
            let _ = write!(s, ",{w}");
        }
        s.push('\n');
        for (hop, row) in grid.spec.hops.iter().zip(&table) {
            let _ = write!(s, "{hop}");
            for cell in row {
                let text = match &cell.outcome {
                    CellOutcome::Done { val_accuracy } => format!("{:.6}", val_accuracy.mean),
                    CellOutcome::Skipped { reason } => format!("skipped: {reason}"),
                    CellOutcome::Failed { reason } => format!("failed: {reason}"),
                };
                let _ = write!(s, ",{}", csv_field(&text));
            }
            s.push('\n');
        }
        out.push((format!("grid_bins{bins}.csv"), s));
    }
    Ok(out)
}

/// Write the report tables into `out_dir` and return the paths written, in order.
/// Output depends only on `input`, so reruns are byte-identical.
pub fn report(input: &ReportInput, out_dir: &Path) -> Result<Vec<PathBuf>> {
    if input.variants.is_empty() || input.variants.iter().any(|v| v.runs.is_empty()) {
        return Err(Error::Data("no metrics to report".into()));
    }
    let classes = &input.class_names;
    for v in &input.variants {
        for r in &v.runs {
            if r.confusion.classes() != classes.len() || r.metrics.per_class.len() != classes.len() {
                return Err(Error::shape(format!("{} run metrics do not match {} classes", v.kind, classes.len())));
            }
        }
    }
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::new();

    let mut acc = String::from("variant,runs,mean_accuracy,std_accuracy");
    for c in classes {
        let _ = write!(acc, ",{}", csv_field(&format!("accuracy_{c}")));
    }
    acc.push('\n');
    let mut summary_variants = Vec::new();
    for v in &input.variants {
        let agg = v.accuracy()?;
        let _ = write!(acc, "{},{},{:.6},{:.6}", v.kind, agg.n, agg.mean, agg.std);
        for c in 0..classes.len() {
            let per = aggregate(&v.runs.iter().map(|r| r.metrics.per_class[c]).collect::<Vec<_>>())?;
            let _ = write!(acc, ",{:.6}", per.mean);
        }
        acc.push('\n');
        summary_variants.push(SummaryVariant {
            variant: v.kind.as_str(),
            runs: agg.n,
            mean_accuracy: agg.mean,
            std_accuracy: agg.std,
            parameters: v.total_parameters(),
        });
    }
    write(out_dir, REPORT_FILES[0], &acc, &mut written)?;

    let mut params = String::from("variant,tensor,parameters\n");
    for v in &input.variants {
        for (name, n) in &v.parameters {
            let _ = writeln!(params, "{},{},{n}", v.kind, csv_field(name));
        }
        let _ = writeln!(params, "{},total,{}", v.kind, v.total_parameters());
    }
    write(out_dir, REPORT_FILES[1], &params, &mut written)?;

    let mut fx = String::from("variant,texture_parameters,classifier_parameters,total_parameters,mean_accuracy\n");
    for v in &input.variants {
        let total = v.total_parameters();
        let texture = v.texture_parameters();
        let _ = writeln!(fx, "{},{texture},{},{total},{:.6}", v.kind, total - texture, v.accuracy()?.mean);
    }
    write(out_dir, REPORT_FILES[2], &fx, &mut written)?;

    for v in &input.variants {
        let summed = ConfusionMatrix::sum(v.runs.iter().map(|r| &r.confusion)).expect("runs checked non-empty");
        write(out_dir, &format!("confusion_{}.csv", v.kind), &confusion_csv(classes, &summed.counts), &mut written)?;
        let pct: Vec<Vec<String>> =
            summed.row_normalized().iter().map(|row| row.iter().map(|p| format!("{p:.4}")).collect()).collect();
        write(out_dir, &format!("confusion_{}_percent.csv", v.kind), &confusion_csv(classes, &pct), &mut written)?;
    }

    if let Some(grid) = &input.grid {
        for (name, csv) in grid_tables(grid)? {
            write(out_dir, &name, &csv, &mut written)?;
        }
    }

    let summary = Summary {
        tool_version: &input.tool_version,
        config_hash: &input.config_hash,
        manifest_hash: input.manifest_hash.as_deref(),
        seeds: &input.seeds,
        class_names: classes,
        variants: summary_variants,
        best_grid_cell: input.grid.as_ref().and_then(|g| g.best()).map(|c| [c.window, c.hop, c.bins]),
    };
    let mut json = serde_json::to_string_pretty(&summary).map_err(|e| Error::Json { context: "summary".into(), source: e })?;
    json.push('\n');
    write(out_dir, REPORT_FILES[3], &json, &mut written)?;
    Ok(written)
}
