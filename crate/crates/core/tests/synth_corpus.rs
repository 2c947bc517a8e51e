use std::collections::BTreeMap;

use nehd::dataset::{load_corpus, spectrograms};
use nehd::ingest::Split;
use nehd::spectral::StftConfig;
use nehd::synth::{build_corpus, SynthSpec, CLASS_NAMES};

fn small() -> SynthSpec {
    SynthSpec { per_class_sources: 10, duration_seconds: 9.0, seed: 4, ..SynthSpec::default() }
}

fn wav_files(dir: &std::path::Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    for class in CLASS_NAMES {
        for e in std::fs::read_dir(dir.join(class)).unwrap() {
            out.push(e.unwrap().path());
        }
    }
    out.sort();
    out
}

#[test]
fn forty_files_give_120_segments_and_a_7_1_2_split() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = build_corpus(&small(), dir.path()).unwrap();
    assert_eq!(wav_files(dir.path()).len(), 40);
    assert_eq!(manifest.entries.len(), 40);
    for split in Split::ALL {
        let mut per_class = BTreeMap::new();
        for e in manifest.split(split) {
            *per_class.entry(e.label).or_insert(0) += 1;
        }
        let want = match split {
            Split::Train => 7,
            Split::Val => 1,
            Split::Test => 2,
        };
        assert_eq!(per_class.len(), 4);
        assert!(per_class.values().all(|&n| n == want), "{split}: {per_class:?}");
    }
    let corpus = load_corpus(&manifest, dir.path(), 16_000, 3.0).unwrap();
    assert_eq!(corpus.train.len() + corpus.val.len() + corpus.test.len(), 120);
    assert_eq!(corpus.train.len(), 84);
    for seg in corpus.train.iter().chain(&corpus.test) {
        assert!(seg.samples.iter().all(|v| v.abs() <= 1.0));
    }
}

#[test]
fn rebuilding_gives_identical_bytes() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ma = build_corpus(&small(), a.path()).unwrap();
    let mb = build_corpus(&small(), b.path()).unwrap();
    assert_eq!(ma, mb);
    assert_eq!(
        std::fs::read(a.path().join("manifest.jsonl")).unwrap(),
        std::fs::read(b.path().join("manifest.jsonl")).unwrap()
    );
    for (fa, fb) in wav_files(a.path()).iter().zip(wav_files(b.path())) {
        assert_eq!(fa.strip_prefix(a.path()).unwrap(), fb.strip_prefix(b.path()).unwrap());
        assert_eq!(std::fs::read(fa).unwrap(), std::fs::read(&fb).unwrap());
    }
}

#[test]
fn mean_log_spectra_are_separable_above_chance() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = build_corpus(&small(), dir.path()).unwrap();
    let corpus = load_corpus(&manifest, dir.path(), 16_000, 3.0).unwrap();
    let cfg = StftConfig::default();
    let profile = |split: Split| -> Vec<(Vec<f64>, usize)> {
        let segs = corpus.split(split);
        spectrograms(segs, &cfg)
            .unwrap()
            .iter()
            .zip(segs)
            .map(|(s, seg)| (s.values.rows().into_iter().map(|r| r.mean().unwrap()).collect(), seg.label))
            .collect()
    };
    let train = profile(Split::Train);
    let test = profile(Split::Test);
    // nearest class centroid, a linear decision rule
    let dims = train[0].0.len();
    let mut centroids = vec![vec![0.0; dims]; 4];
    let mut counts = [0usize; 4];
    for (v, y) in &train {
        counts[*y] += 1;
        for (c, x) in centroids[*y].iter_mut().zip(v) {
            *c += x;
        }
    }
    for (c, n) in centroids.iter_mut().zip(counts) {
        c.iter_mut().for_each(|x| *x /= n as f64);
    }
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>();
    let correct = test
        .iter()
        .filter(|(v, y)| {
            let pred = (0..4).min_by(|&i, &j| dist(v, &centroids[i]).total_cmp(&dist(v, &centroids[j]))).unwrap();
            pred == *y
        })
        .count();
    let acc = correct as f64 / test.len() as f64;
    assert!(acc > 0.25, "nearest-centroid accuracy {acc}");
}
