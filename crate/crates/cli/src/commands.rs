use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nehd::dataset::{labeled_segments, load_corpus, prepare, SegmentCorpus};
use nehd::eval::{
    confusion, confusion_csv, grid_search, grid_tables, report, run_seed, train_and_test, Metrics, ReportInput,
    RunSummary, VariantSummary,
};
use nehd::ingest::{scan_class_dirs, split_dataset};
use nehd::model::{
    build_model, count_parameters, evaluate as evaluate_model, export_features as export_model, load_checkpoint,
    save_checkpoint, train as train_model, CheckpointMeta, SIDECAR_VERSION,
};
use nehd::spectral::{fit_normalizer, write_tensor};
use nehd::synth::build_corpus;
use nehd::{DatasetManifest, Error, ModelKind, Split};

use crate::config::{resolve_path, write_snapshot, RunConfig};
use crate::{
    AblationArgs, CliError, Common, CountArgs, EvaluateArgs, ExportArgs, FeaturizeArgs, GridArgs, IngestArgs, SynthArgs,
    TrainArgs,
};

type CliResult<T = ()> = Result<T, CliError>;

const CHECKPOINT_FILE: &str = "model.ckpt";

/// Load the config file, apply the seed override and prepare the output directory.
fn setup(common: &Common, overrides: impl FnOnce(&mut RunConfig)) -> CliResult<(RunConfig, bool, PathBuf)> {
    if let Some(jobs) = common.jobs {
        if jobs == 0 {
            return Err(Error::config("--jobs must be at least 1").into());
        }
        // fails only if a pool already exists, which cannot happen in a single invocation
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
    let config_path = common.config.as_deref().map(resolve_path);
    let loaded = RunConfig::load(config_path.as_deref())?;
    let mut config = loaded.config;
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    overrides(&mut config);
    config.sync_seeds();
    let out = resolve_path(&common.out);
    std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    Ok((config, loaded.explicit_stft, out))
}

fn write_text(path: &Path, text: &str) -> CliResult {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> CliResult {
    let mut text = serde_json::to_string_pretty(value).expect("value serializes");
    text.push('\n');
    write_text(path, &text)
}

fn manifest_of(config: &RunConfig) -> CliResult<(DatasetManifest, PathBuf)> {
    let path = config
        .data
        .manifest
        .as_deref()
        .ok_or_else(|| Error::config("no manifest given (use --manifest or [data] manifest)"))?;
    let path = resolve_path(path);
    let manifest = DatasetManifest::read(&path)?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok((manifest, base))
}

fn corpus_of(config: &RunConfig) -> CliResult<(SegmentCorpus, String)> {
    let (manifest, base) = manifest_of(config)?;
    let corpus = load_corpus(&manifest, &base, config.data.sample_rate, config.data.segment_seconds)?;
    Ok((corpus, manifest.content_hash()))
}

fn file_stem(source_id: &str, offset_seconds: f64) -> String {
    let id: String = source_id.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect();
    format!("{id}_{:08}ms", (offset_seconds * 1000.0).round() as u64)
}

pub fn synth(a: SynthArgs) -> CliResult {
    let (config, _, out) = setup(&a.common, |c| {
        if let Some(v) = a.per_class_sources {
            c.synth.per_class_sources = v;
        }
        if let Some(v) = a.duration {
            c.synth.duration_seconds = v;
        }
        if let Some(v) = a.snr_db {
            c.synth.snr_db = v;
        }
    })?;
    let manifest = build_corpus(&config.synth, &out)?;
    write_snapshot(&out, "synth", &config, Some(manifest.content_hash()))?;
    println!("wrote {} sources and manifest.jsonl to {}", manifest.entries.len(), out.display());
    Ok(())
}

pub fn ingest(a: IngestArgs) -> CliResult {
    let (config, _, out) = setup(&a.common, |_| {})?;
    let input = resolve_path(&a.input);
    let input = input.canonicalize().map_err(|e| Error::io(&input, e))?;
    let (mut sources, class_names) = scan_class_dirs(&input)?;
    for s in &mut sources {
        s.path = input.join(&s.path);
    }
    let manifest = split_dataset(&sources, &class_names, config.data.ratios, config.seed)?;
    manifest.write(&out.join("manifest.jsonl"))?;
    write_snapshot(&out, "ingest", &config, Some(manifest.content_hash()))?;
    println!("{} sources in {} classes", manifest.entries.len(), class_names.len());
    Ok(())
}

pub fn featurize(a: FeaturizeArgs) -> CliResult {
    let (config, _, out) = setup(&a.common, |c| {
        a.data.apply(c);
        a.stft.apply(c);
    })?;
    let (corpus, hash) = corpus_of(&config)?;
    let mut index = String::from("split,file,source_id,offset_seconds,label\n");
    let mut train_specs = Vec::new();
    for split in Split::ALL {
        let segments = corpus.split(split);
        let specs = nehd::dataset::spectrograms(segments, &config.stft)?;
        let dir = out.join(split.as_str());
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        for (spec, seg) in specs.iter().zip(segments) {
            let name = format!("{}.nhdt", file_stem(&seg.source_id, seg.offset_seconds));
            write_tensor(&dir.join(&name), &spec.values.clone().into_dyn())?;
            let _ = writeln!(index, "{split},{split}/{name},{},{},{}", seg.source_id, seg.offset_seconds, seg.label);
        }
        if split == Split::Train {
            train_specs = specs;
        }
    }
    let norm = fit_normalizer(&train_specs)?;
    write_tensor(&out.join("norm.nhdt"), &norm.to_tensor())?;
    write_text(&out.join("index.csv"), &index)?;
    write_snapshot(&out, "featurize", &config, Some(hash))?;
    println!("wrote {} spectrograms of {}x{}", index.lines().count() - 1, config.stft.freq_bins, corpus_frames(&config, &corpus));
    Ok(())
}

fn corpus_frames(config: &RunConfig, corpus: &SegmentCorpus) -> usize {
    config.stft.frames_for(corpus.segment_len()).unwrap_or(0)
}

pub fn train(a: TrainArgs) -> CliResult {
    let (config, _, out) = setup(&a.common, |c| {
        a.data.apply(c);
        a.stft.apply(c);
        a.model.apply(c);
        a.train.apply(c);
    })?;
    let (corpus, hash) = corpus_of(&config)?;
    let data = prepare(&corpus, &config.stft)?;
    let (f, t) = data.input_dims();
    let model_cfg = config.model.model_config(config.model.variant, f, t, data.class_names.len());
    let model = build_model(model_cfg, config.seed)?;
    let (model, history) = train_model(model, &data.train, &data.val, &config.train)?;
    let meta = CheckpointMeta {
        version: SIDECAR_VERSION,
        model: model_cfg,
        stft: config.stft,
        sample_rate: config.data.sample_rate,
        segment_seconds: config.data.segment_seconds,
        class_names: data.class_names.clone(),
        model_seed: config.seed,
        train: Some(config.train),
        manifest_hash: Some(hash.clone()),
    };
    save_checkpoint(&out.join(CHECKPOINT_FILE), &model, &data.norm, &meta)?;
    write_text(&out.join("history.csv"), &history.to_csv())?;
    write_snapshot(&out, "train", &config, Some(hash))?;
    let best = history.best();
    println!(
        "{}: best epoch {} of {}, val_acc {:.4}, {} parameters",
        model_cfg.kind,
        best.epoch,
        history.epochs.len(),
        best.val_acc,
        count_parameters(&model)
    );
    Ok(())
}

#[derive(serde::Serialize)]
struct EvalReport<'a> {
    split: &'a str,
    loss: f64,
    #[serde(flatten)]
    metrics: Metrics,
    class_names: &'a [String],
}

fn check_match<T: PartialEq + std::fmt::Debug>(what: &'static str, checkpoint: &T, requested: &T) -> CliResult {
    if checkpoint != requested {
        return Err(Error::Mismatch { what, detail: format!("checkpoint has {checkpoint:?}, run requests {requested:?}") }.into());
    }
    Ok(())
}

pub fn evaluate(a: EvaluateArgs) -> CliResult {
    let (mut config, explicit_stft, out) = setup(&a.common, |c| {
        a.data.apply(c);
        a.stft.apply(c);
    })?;
    let (model, norm, meta) = load_checkpoint(&resolve_path(&a.checkpoint))?;
    if explicit_stft || a.stft.any() {
        check_match("spectral config", &meta.stft, &config.stft)?;
    }
    if let Some(rate) = a.data.sample_rate {
        check_match("sample rate", &meta.sample_rate, &rate)?;
    }
    if let Some(secs) = a.data.segment_seconds {
        check_match("segment length", &meta.segment_seconds, &secs)?;
    }
    config.stft = meta.stft;
    config.data.sample_rate = meta.sample_rate;
    config.data.segment_seconds = meta.segment_seconds;

    let (corpus, hash) = corpus_of(&config)?;
    check_match("class names", &meta.class_names, &corpus.class_names)?;
    let set = labeled_segments(corpus.split(a.split), &meta.stft, &norm)?;
    if set.is_empty() {
        return Err(Error::Data(format!("split {} is empty", a.split)).into());
    }
    let eval = evaluate_model(&model, &set)?;
    let cm = confusion(&eval.predictions, &set.labels, meta.class_names.len())?;
    let metrics = Metrics::from_confusion(&cm);
    println!("{} {}: accuracy {:.4} over {} segments", meta.model.kind, a.split, metrics.accuracy, metrics.samples);
    write_json(
        &out.join("metrics.json"),
        &EvalReport { split: a.split.as_str(), loss: eval.loss, metrics, class_names: &meta.class_names },
    )?;
    write_text(&out.join("confusion.csv"), &confusion_csv(&meta.class_names, &cm.counts))?;
    let pct: Vec<Vec<String>> = cm.row_normalized().iter().map(|r| r.iter().map(|p| format!("{p:.4}")).collect()).collect();
    write_text(&out.join("confusion_percent.csv"), &confusion_csv(&meta.class_names, &pct))?;
    write_snapshot(&out, "evaluate", &config, Some(hash))?;
    Ok(())
}

pub fn gridsearch(a: GridArgs) -> CliResult {
    let (config, _, out) = setup(&a.common, |c| {
        a.data.apply(c);
        a.stft.apply(c);
        a.model.apply(c);
        a.train.apply(c);
        if let Some(w) = &a.windows {
            c.grid.windows = w.clone();
        }
        if let Some(h) = &a.hops {
            c.grid.hops = h.clone();
        }
        if let Some(b) = &a.bins_list {
            c.grid.bins_list = b.clone();
        }
    })?;
    let (corpus, hash) = corpus_of(&config)?;
    // input dims are filled in per cell
    let model_cfg = config.model.model_config(config.model.variant, 0, 0, corpus.class_names.len());
    let grid = grid_search(&config.grid, &corpus, &config.stft, model_cfg, &config.train, config.seed)?;
    for (name, csv) in grid_tables(&grid)? {
        write_text(&out.join(name), &csv)?;
    }
    write_json(&out.join("grid.json"), &grid)?;
    write_snapshot(&out, "gridsearch", &config, Some(hash))?;
    match grid.best() {
        Some(c) => println!("best cell: window {} hop {} bins {}", c.window, c.hop, c.bins),
        None => println!("no grid cell completed"),
    }
    Ok(())
}

pub fn export_features(a: ExportArgs) -> CliResult {
    let (mut config, _, out) = setup(&a.common, |c| a.data.apply(c))?;
    let (model, norm, meta) = load_checkpoint(&resolve_path(&a.checkpoint))?;
    if meta.model.kind != ModelKind::Nehd {
        return Err(Error::config(format!("feature export needs a nehd checkpoint, got {}", meta.model.kind)).into());
    }
    config.stft = meta.stft;
    config.data.sample_rate = meta.sample_rate;
    config.data.segment_seconds = meta.segment_seconds;
    let (corpus, hash) = corpus_of(&config)?;
    let segments = corpus.split(a.split);
    let segments = &segments[..a.limit.unwrap_or(segments.len()).min(segments.len())];
    let set = labeled_segments(segments, &meta.stft, &norm)?;
    let dir = out.join(a.split.as_str());
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let mut index = String::from("file,source_id,offset_seconds,label\n");
    for ((x, seg), label) in set.inputs.iter().zip(segments).zip(&set.labels) {
        let stacked = export_model(&model, x.view())?;
        let name = format!("{}.nhdt", file_stem(&seg.source_id, seg.offset_seconds));
        write_tensor(&dir.join(&name), &stacked.into_dyn())?;
        let _ = writeln!(index, "{}/{name},{},{},{label}", a.split, seg.source_id, seg.offset_seconds);
    }
    write_text(&out.join("index.csv"), &index)?;
    write_snapshot(&out, "export-features", &config, Some(hash))?;
    println!("exported {} stacked feature tensors with {} channels", set.len(), 1 + meta.model.bins);
    Ok(())
}

pub fn count_params(a: CountArgs) -> CliResult {
    let config_path = a.config.as_deref().map(resolve_path);
    let mut config = RunConfig::load(config_path.as_deref())?.config;
    a.model.apply(&mut config);
    let model_cfg = config.model.model_config(config.model.variant, a.freq_bins, a.frames, a.classes);
    let model = build_model(model_cfg, config.seed)?;
    if a.breakdown {
        for (name, t) in model.parameters() {
            println!("{name} {}", t.len());
        }
    }
    println!("{}", count_parameters(&model));
    Ok(())
}

pub fn ablation(a: AblationArgs) -> CliResult {
    let (config, _, out) = setup(&a.common, |c| {
        a.data.apply(c);
        a.stft.apply(c);
        a.model.apply(c);
        a.train.apply(c);
    })?;
    let kinds = a.variants.clone().unwrap_or_else(|| ModelKind::ALL.to_vec());
    let (corpus, hash) = corpus_of(&config)?;
    let data = prepare(&corpus, &config.stft)?;
    let (f, t) = data.input_dims();
    let seeds: Vec<u64> = (0..config.train.num_runs).map(|r| run_seed(config.seed, r)).collect();
    let mut variants = Vec::new();
    for kind in kinds {
        let model_cfg = config.model.model_config(kind, f, t, data.class_names.len());
        let mut runs = Vec::new();
        let mut parameters = Vec::new();
        for (r, &seed) in seeds.iter().enumerate() {
            let outcome = train_and_test(&data, model_cfg, &config.train, seed)?;
            write_text(&out.join(format!("history_{kind}_run{r}.csv")), &outcome.history.to_csv())?;
            parameters = outcome.model.parameters().iter().map(|(n, t)| (n.to_string(), t.len())).collect();
            println!("{kind} run {r} (seed {seed}): test accuracy {:.4}", outcome.test.accuracy);
            runs.push(RunSummary {
                seed,
                metrics: outcome.test,
                confusion: outcome.confusion,
                best_epoch: outcome.history.best_epoch,
                epochs_run: outcome.history.epochs.len(),
            });
        }
        variants.push(VariantSummary { kind, parameters, runs });
    }
    let input = ReportInput {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        class_names: data.class_names.clone(),
        variants,
        grid: None,
        config_hash: config.hash(),
        manifest_hash: Some(hash.clone()),
        seeds,
    };
    report(&input, &out)?;
    write_snapshot(&out, "ablation", &config, Some(hash))?;
    Ok(())
}
