use nehd::dataset::{load_corpus, prepare, SegmentCorpus};
use nehd::eval::{
    cell_seed, grid_search, report, train_and_test, CellOutcome, GridSpec, ReportInput, RunSummary, VariantSummary,
    REPORT_FILES,
};
use nehd::model::{evaluate, load_checkpoint, save_checkpoint, CheckpointMeta, ModelConfig, ModelKind, TrainConfig, SIDECAR_VERSION};
use nehd::spectral::StftConfig;
use nehd::synth::{build_corpus, SynthSpec};

fn corpus() -> (tempfile::TempDir, SegmentCorpus, String) {
    let dir = tempfile::tempdir().unwrap();
    let spec = SynthSpec { per_class_sources: 10, duration_seconds: 6.0, seed: 8, ..SynthSpec::default() };
    let manifest = build_corpus(&spec, dir.path()).unwrap();
    let corpus = load_corpus(&manifest, dir.path(), 16_000, 3.0).unwrap();
    (dir, corpus, manifest.content_hash())
}

fn quick_train() -> TrainConfig {
    TrainConfig { epochs: 3, batch_size: 16, patience: 3, num_runs: 1, ..TrainConfig::default() }
}

#[test]
fn checkpoint_round_trip_preserves_predictions() {
    let (dir, corpus, hash) = corpus();
    let data = prepare(&corpus, &StftConfig::default()).unwrap();
    assert_eq!(data.input_dims(), (192, 12));
    let run = train_and_test(&data, ModelConfig::new(ModelKind::Nehd), &quick_train(), 3).unwrap();
    let meta = CheckpointMeta {
        version: SIDECAR_VERSION,
        model: run.model.config,
        stft: data.stft,
        sample_rate: 16_000,
        segment_seconds: 3.0,
        class_names: data.class_names.clone(),
        model_seed: 3,
        train: Some(quick_train()),
        manifest_hash: Some(hash),
    };
    let path = dir.path().join("model.ckpt");
    save_checkpoint(&path, &run.model, &data.norm, &meta).unwrap();
    let (model, norm, meta_back) = load_checkpoint(&path).unwrap();
    // tensors are stored as float32
    let mut expected = run.model.clone();
    for mut t in expected.parameters_mut() {
        t.mapv_inplace(|v| v as f32 as f64);
    }
    assert_eq!(model, expected);
    let rounded: Vec<f64> = data.norm.mean.iter().map(|&v| v as f32 as f64).collect();
    assert_eq!(norm.mean, rounded);
    assert_eq!(meta_back, meta);
    let before = evaluate(&run.model, &data.test).unwrap();
    let after = evaluate(&model, &data.test).unwrap();
    assert!((before.loss - after.loss).abs() < 1e-4);
}

#[test]
fn single_cell_grid_matches_a_standalone_run() {
    let (_dir, corpus, _) = corpus();
    let spec = GridSpec { windows: vec![6144], hops: vec![4096], bins_list: vec![192] };
    let cfg = quick_train();
    let grid = grid_search(&spec, &corpus, &StftConfig::default(), ModelConfig::new(ModelKind::Nehd), &cfg, 21).unwrap();
    assert_eq!(grid.cells.len(), 1);
    let seed = cell_seed(21, 6144, 4096, 192);
    let data = prepare(&corpus, &StftConfig::default()).unwrap();
    let run = train_and_test(&data, ModelConfig::new(ModelKind::Nehd), &cfg, seed).unwrap();
    match &grid.cells[0].outcome {
        CellOutcome::Done { val_accuracy } => assert_eq!(val_accuracy.mean, run.history.best().val_acc),
        other => panic!("cell not trained: {other:?}"),
    }
}

#[test]
fn grid_is_rectangular_with_skipped_cells() {
    let (_dir, corpus, _) = corpus();
    let spec = GridSpec { windows: vec![2048, 96_000], hops: vec![1024, 4096], bins_list: vec![48, 2000] };
    let cfg = TrainConfig { epochs: 1, patience: 0, ..quick_train() };
    let grid = grid_search(&spec, &corpus, &StftConfig::default(), ModelConfig::new(ModelKind::Linear), &cfg, 0).unwrap();
    assert_eq!(grid.cells.len(), 8);
    for bins in [48, 2000] {
        let table = grid.table(bins).unwrap();
        assert_eq!(table.len(), 2);
        assert!(table.iter().all(|row| row.len() == 2));
    }
    let t = grid.table(48).unwrap();
    assert!(matches!(t[0][0].outcome, CellOutcome::Done { .. }));
    // hop 4096 > window 2048
    assert!(matches!(&t[1][0].outcome, CellOutcome::Skipped { reason } if reason.contains("exceeds")));
    // window longer than a 3 s segment
    assert!(matches!(t[0][1].outcome, CellOutcome::Skipped { .. }));
    // more bins than the window provides
    assert!(grid.table(2000).unwrap()[0].iter().all(|c| matches!(c.outcome, CellOutcome::Skipped { .. })));
}

#[test]
fn report_is_reproducible() {
    let (_dir, corpus, hash) = corpus();
    let data = prepare(&corpus, &StftConfig::default()).unwrap();
    let mut variants = Vec::new();
    for kind in [ModelKind::Linear, ModelKind::Nehd] {
        let runs = (0..2)
            .map(|seed| {
                let r = train_and_test(&data, ModelConfig::new(kind), &quick_train(), seed).unwrap();
                RunSummary {
                    seed,
                    metrics: r.test,
                    confusion: r.confusion,
                    best_epoch: r.history.best_epoch,
                    epochs_run: r.history.epochs.len(),
                }
            })
            .collect();
        let model = nehd::model::build_model(ModelConfig::new(kind), 0).unwrap();
        let parameters = model.parameters().iter().map(|(n, t)| (n.to_string(), t.len())).collect();
        variants.push(VariantSummary { kind, parameters, runs });
    }
    let input = ReportInput {
        tool_version: "test".into(),
        class_names: data.class_names.clone(),
        variants,
        grid: None,
        config_hash: "abc".into(),
        manifest_hash: Some(hash),
        seeds: vec![0, 1],
    };
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let fa = report(&input, a.path()).unwrap();
    let fb = report(&input, b.path()).unwrap();
    assert_eq!(fa.len(), fb.len());
    for name in REPORT_FILES {
        assert!(a.path().join(name).exists());
    }
    for (x, y) in fa.iter().zip(&fb) {
        assert_eq!(std::fs::read(x).unwrap(), std::fs::read(y).unwrap());
    }
    let params = std::fs::read_to_string(a.path().join("parameters.csv")).unwrap();
    assert!(params.contains("linear,total,9220"));
    assert!(params.contains("nehd,total,9389"));
    let confusion = std::fs::read_to_string(a.path().join("confusion_nehd.csv")).unwrap();
    assert!(confusion.starts_with("predicted\\true,tonal,chirp,broadband,modulated\n"));

    let empty = ReportInput { variants: vec![], ..input };
    assert!(report(&empty, tempfile::tempdir().unwrap().path()).is_err());
}
