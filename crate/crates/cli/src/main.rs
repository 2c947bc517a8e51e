//! `nehd`: synthesize or ingest a corpus, compute spectrograms, train and evaluate the
//! ablation models, run the STFT grid search and export NEHD features.
//!
//! Every command that writes files records a `run.toml` snapshot (resolved config, seed,
//! manifest hash) in its output directory. Failures print a single line
//! `error: kind=<kind> message=<text>` and exit with status 1; usage errors exit with 2.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use config::RunConfig;
use nehd::nehd::EdgeInit;
use nehd::spectral::MagnitudeScale;
use nehd::ModelKind;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] nehd::Error),

    #[error("{}: {detail}", path.display())]
    Toml { path: PathBuf, detail: String },
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.kind(),
            CliError::Toml { .. } => "config",
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "nehd", version, about = "Neural edge histogram descriptors for passive-sonar classification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate the synthetic four-class corpus (WAV files plus manifest).
    Synth(SynthArgs),
    /// Write a stratified manifest for a `<dir>/<class>/<file>.wav` tree.
    Ingest(IngestArgs),
    /// Compute spectrograms of every segment and store them as tensor files.
    Featurize(FeaturizeArgs),
    /// Train one model variant and write its checkpoint and history.
    Train(TrainArgs),
    /// Score a checkpoint on one split of a manifest.
    Evaluate(EvaluateArgs),
    /// Train NEHD over a grid of STFT window, hop and bin settings.
    Gridsearch(GridArgs),
    /// Stack spectrograms with the histogram maps of a trained NEHD checkpoint.
    ExportFeatures(ExportArgs),
    /// Print the learnable parameter count of a model variant.
    CountParams(CountArgs),
    /// Train all variants over several seeds and write the comparison report.
    Ablation(AblationArgs),
}

#[derive(Args, Debug)]
struct Common {
    /// TOML run configuration; command-line flags take precedence over it.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Seed for every random choice in the run.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 1 runs everything sequentially.
    #[arg(long, value_name = "N")]
    jobs: Option<usize>,
    /// Output directory, relative to $NEHD_OUTPUT_ROOT unless absolute.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Args, Debug, Default)]
struct DataArgs {
    /// Dataset manifest (JSONL).
    #[arg(long, value_name = "FILE")]
    manifest: Option<PathBuf>,
    #[arg(long, value_name = "HZ")]
    sample_rate: Option<u32>,
    #[arg(long, value_name = "SECONDS")]
    segment_seconds: Option<f64>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Magnitude {
    LogPower,
    Linear,
}

#[derive(Args, Debug, Default)]
struct StftArgs {
    #[arg(long, value_name = "SAMPLES")]
    window_length: Option<usize>,
    #[arg(long, value_name = "SAMPLES")]
    hop_length: Option<usize>,
    /// Lowest frequency bins kept.
    #[arg(long, value_name = "N")]
    freq_bins: Option<usize>,
    #[arg(long, value_name = "BOOL")]
    center_pad: Option<bool>,
    #[arg(long, value_enum)]
    magnitude: Option<Magnitude>,
}

impl StftArgs {
    fn any(&self) -> bool {
        self.window_length.is_some()
            || self.hop_length.is_some()
            || self.freq_bins.is_some()
            || self.center_pad.is_some()
            || self.magnitude.is_some()
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum EdgeInitArg {
    Sobel,
    Random,
}

#[derive(Args, Debug, Default)]
struct ModelArgs {
    /// linear, edge_only, histogram_only or nehd.
    #[arg(long)]
    variant: Option<ModelKind>,
    /// Number of edge filters.
    #[arg(long)]
    edges: Option<usize>,
    /// Number of histogram bins.
    #[arg(long)]
    bins: Option<usize>,
    #[arg(long)]
    pool_rows: Option<usize>,
    #[arg(long)]
    pool_cols: Option<usize>,
    #[arg(long, value_enum)]
    edge_init: Option<EdgeInitArg>,
    /// Kernel size for random edge initialization.
    #[arg(long, default_value_t = 3)]
    kernel: usize,
}

#[derive(Args, Debug, Default)]
struct TrainFlags {
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    /// Independent runs (seeds seed, seed+1, ...).
    #[arg(long)]
    runs: Option<usize>,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    per_class_sources: Option<usize>,
    #[arg(long, value_name = "SECONDS")]
    duration: Option<f64>,
    /// Signal-to-noise ratio; `inf` disables the noise.
    #[arg(long, value_name = "DB")]
    snr_db: Option<f64>,
}

#[derive(Args, Debug)]
struct IngestArgs {
    #[command(flatten)]
    common: Common,
    /// Root of the class-per-directory WAV tree.
    #[arg(long, value_name = "DIR")]
    input: PathBuf,
}

#[derive(Args, Debug)]
struct FeaturizeArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    stft: StftArgs,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    stft: StftArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    train: TrainFlags,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_name = "FILE")]
    checkpoint: PathBuf,
    #[arg(long, default_value = "test")]
    split: nehd::Split,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    stft: StftArgs,
}

#[derive(Args, Debug)]
struct GridArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    stft: StftArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    train: TrainFlags,
    /// Window lengths to try.
    #[arg(long, value_delimiter = ',')]
    windows: Option<Vec<usize>>,
    /// Hop lengths to try.
    #[arg(long, value_delimiter = ',')]
    hops: Option<Vec<usize>>,
    /// Frequency bin counts to try.
    #[arg(long, value_delimiter = ',')]
    bins_list: Option<Vec<usize>>,
}

#[derive(Args, Debug)]
struct ExportArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_name = "FILE")]
    checkpoint: PathBuf,
    #[arg(long, default_value = "test")]
    split: nehd::Split,
    /// Export at most this many segments.
    #[arg(long)]
    limit: Option<usize>,
    #[command(flatten)]
    data: DataArgs,
}

#[derive(Args, Debug)]
struct CountArgs {
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 192)]
    freq_bins: usize,
    #[arg(long, default_value_t = 12)]
    frames: usize,
    #[arg(long, default_value_t = 4)]
    classes: usize,
    /// Also print the count of every tensor.
    #[arg(long)]
    breakdown: bool,
}

#[derive(Args, Debug)]
struct AblationArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    stft: StftArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    train: TrainFlags,
    /// Variants to compare (default: all four).
    #[arg(long, value_delimiter = ',')]
    variants: Option<Vec<ModelKind>>,
}

impl DataArgs {
    fn apply(&self, c: &mut RunConfig) {
        if let Some(m) = &self.manifest {
            c.data.manifest = Some(m.clone());
        }
        if let Some(r) = self.sample_rate {
            c.data.sample_rate = r;
        }
        if let Some(s) = self.segment_seconds {
            c.data.segment_seconds = s;
        }
    }
}

impl StftArgs {
    fn apply(&self, c: &mut RunConfig) {
        let s = &mut c.stft;
        if let Some(v) = self.window_length {
            s.window_length = v;
        }
        if let Some(v) = self.hop_length {
            s.hop_length = v;
        }
        if let Some(v) = self.freq_bins {
            s.freq_bins = v;
        }
        if let Some(v) = self.center_pad {
            s.center_pad = v;
        }
        if let Some(m) = self.magnitude {
            s.magnitude_scale = match m {
                Magnitude::LogPower => MagnitudeScale::LogPower,
                Magnitude::Linear => MagnitudeScale::Linear,
            };
        }
    }
}

impl ModelArgs {
    fn apply(&self, c: &mut RunConfig) {
        let m = &mut c.model;
        if let Some(v) = self.variant {
            m.variant = v;
        }
        if let Some(v) = self.edges {
            m.edges = v;
        }
        if let Some(v) = self.bins {
            m.bins = v;
        }
        if let Some(v) = self.pool_rows {
            m.pool_rows = v;
        }
        if let Some(v) = self.pool_cols {
            m.pool_cols = v;
        }
        if let Some(e) = self.edge_init {
            m.edge_init = match e {
                EdgeInitArg::Sobel => EdgeInit::Sobel,
                EdgeInitArg::Random => EdgeInit::Random { kernel: self.kernel },
            };
        }
    }
}

impl TrainFlags {
    fn apply(&self, c: &mut RunConfig) {
        let t = &mut c.train;
        if let Some(v) = self.epochs {
            t.epochs = v;
        }
        if let Some(v) = self.batch_size {
            t.batch_size = v;
        }
        if let Some(v) = self.patience {
            t.patience = v;
        }
        if let Some(v) = self.learning_rate {
            t.learning_rate = v;
        }
        if let Some(v) = self.runs {
            t.num_runs = v;
        }
        // a shortened run keeps the default patience from exceeding it
        if self.epochs.is_some() && self.patience.is_none() {
            t.patience = t.patience.min(t.epochs);
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::Ingest(a) => commands::ingest(a),
        Command::Featurize(a) => commands::featurize(a),
        Command::Train(a) => commands::train(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Gridsearch(a) => commands::gridsearch(a),
        Command::ExportFeatures(a) => commands::export_features(a),
        Command::CountParams(a) => commands::count_params(a),
        Command::Ablation(a) => commands::ablation(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let message = e.to_string().replace(['\n', '\r'], " ");
            eprintln!("error: kind={} message={}", e.kind(), message);
            ExitCode::from(1)
        }
    }
}
