//! Source-level dataset splits and the line-delimited manifest file.
//!
//! File layout: the first line is a header object carrying `schema_version`, `seed`,
//! `ratios` and `class_names`; every following line is one source record with
//! `id`, `path`, `label` (class name) and `split`.

use std::fmt;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::config(format!("unknown split {other:?}"))),
        }
    }
}

/// A recording before it has been assigned to a split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceRecord {
    pub id: String,
    pub path: PathBuf,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub id: String,
    pub path: PathBuf,
    pub label: usize,
    pub split: Split,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios { train: 0.7, val: 0.1, test: 0.2 }
    }
}

impl SplitRatios {
    fn validate(&self) -> Result<()> {
        let all = [self.train, self.val, self.test];
        if all.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(Error::config(format!("split ratios must be positive, got {all:?}")));
        }
        if (all.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::config(format!("split ratios must sum to 1, got {all:?}")));
        }
        Ok(())
    }

    /// Largest-remainder apportionment of `n` items. Every count is within one of its ideal share.
    pub fn apportion(&self, n: usize) -> [usize; 3] {
        let ideal = [self.train * n as f64, self.val * n as f64, self.test * n as f64];
        let mut counts = ideal.map(|x| x.floor() as usize);
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| (ideal[b] - ideal[b].floor()).total_cmp(&(ideal[a] - ideal[a].floor())));
        let mut left = n - counts.iter().sum::<usize>();
        for &i in order.iter().cycle() {
            if left == 0 {
                break;
            }
            counts[i] += 1;
            left -= 1;
        }
        counts
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub class_names: Vec<String>,
    pub seed: u64,
    pub ratios: SplitRatios,
    pub entries: Vec<ManifestEntry>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    schema_version: u32,
    seed: u64,
    ratios: SplitRatios,
    class_names: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct Record {
    id: String,
    path: String,
    label: String,
    split: Split,
}

/// Stratified, seeded, source-level split.
///
/// Sources of each class are sorted by id, shuffled with a class-specific stream derived from
/// `seed`, then cut according to [`SplitRatios::apportion`].
pub fn split_dataset(
    sources: &[SourceRecord],
    class_names: &[String],
    ratios: SplitRatios,
    seed: u64,
) -> Result<DatasetManifest> {
    ratios.validate()?;
    let mut entries = Vec::with_capacity(sources.len());
    for (class, name) in class_names.iter().enumerate() {
        let mut members: Vec<&SourceRecord> = sources.iter().filter(|s| s.label == class).collect();
        if members.len() < 3 {
            return Err(Error::Stratification { class: name.clone(), count: members.len() });
        }
        members.sort_by(|a, b| a.id.cmp(&b.id));
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (class as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        members.shuffle(&mut rng);
        let [n_train, n_val, _] = ratios.apportion(members.len());
        for (i, s) in members.into_iter().enumerate() {
            let split = if i < n_train {
                Split::Train
            } else if i < n_train + n_val {
                Split::Val
            } else {
                Split::Test
            };
            entries.push(ManifestEntry { id: s.id.clone(), path: s.path.clone(), label: s.label, split });
        }
    }
    if let Some(s) = sources.iter().find(|s| s.label >= class_names.len()) {
        return Err(Error::Label { label: s.label, classes: class_names.len() });
    }
    entries.sort_by(|a, b| a.id.cmp(&b.id));
    if entries.windows(2).any(|w| w[0].id == w[1].id) {
        return Err(Error::Data("duplicate source id".into()));
    }
    Ok(DatasetManifest { class_names: class_names.to_vec(), seed, ratios, entries })
}

impl DatasetManifest {
    pub fn split(&self, split: Split) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(move |e| e.split == split)
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn to_jsonl(&self) -> String {
        let header = Header {
            schema_version: MANIFEST_SCHEMA_VERSION,
            seed: self.seed,
            ratios: self.ratios,
            class_names: self.class_names.clone(),
        };
        let mut out = serde_json::to_string(&header).expect("header serializes");
        out.push('\n');
        for e in &self.entries {
            let rec = Record {
                id: e.id.clone(),
                path: e.path.to_string_lossy().into_owned(),
                label: self.class_names[e.label].clone(),
                split: e.split,
            };
            out.push_str(&serde_json::to_string(&rec).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let first = lines.next().ok_or_else(|| Error::Data("empty manifest".into()))?;
        let header: Header = serde_json::from_str(first)
            .map_err(|source| Error::Json { context: "manifest header".into(), source })?;
        if header.schema_version != MANIFEST_SCHEMA_VERSION {
            return Err(Error::Version {
                what: "manifest schema",
                found: header.schema_version,
                expected: MANIFEST_SCHEMA_VERSION,
            });
        }
        let mut entries = Vec::new();
        for (n, line) in lines.enumerate() {
            let rec: Record = serde_json::from_str(line)
                .map_err(|source| Error::Json { context: format!("manifest record {}", n + 1), source })?;
            let label = header
                .class_names
                .iter()
                .position(|c| *c == rec.label)
                .ok_or_else(|| Error::Data(format!("record {:?} has unknown label {:?}", rec.id, rec.label)))?;
            entries.push(ManifestEntry { id: rec.id, path: PathBuf::from(rec.path), label, split: rec.split });
        }
        Ok(DatasetManifest { class_names: header.class_names, seed: header.seed, ratios: header.ratios, entries })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_jsonl()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_jsonl(&text)
    }

    /// Content hash of the serialized manifest, computed git-blob style (`blob <len>\0` prefix)
    /// with SHA-256.
    pub fn content_hash(&self) -> String {
        content_hash(self.to_jsonl().as_bytes())
    }

    /// Resolve an entry path against the directory holding the manifest.
    pub fn resolve(&self, base: &Path, entry: &ManifestEntry) -> PathBuf {
        if entry.path.is_absolute() {
            entry.path.clone()
        } else {
            base.join(&entry.path)
        }
    }
}

pub fn content_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    hex::encode(h.finalize())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn sources(per_class: &[usize]) -> (Vec<SourceRecord>, Vec<String>) {
        let names: Vec<String> = (0..per_class.len()).map(|c| format!("class{c}")).collect();
        let mut out = Vec::new();
        for (c, &n) in per_class.iter().enumerate() {
            for i in 0..n {
                let id = format!("c{c}_s{i:03}");
                out.push(SourceRecord { path: PathBuf::from(format!("{id}.wav")), id, label: c });
            }
        }
        (out, names)
    }

    fn counts(m: &DatasetManifest, class: usize) -> [usize; 3] {
        Split::ALL.map(|s| m.split(s).filter(|e| e.label == class).count())
    }

    #[test]
    fn ten_sources_split_seven_one_two() {
        let (src, names) = sources(&[10]);
        for seed in [0, 1, 99] {
            let m = split_dataset(&src, &names, SplitRatios::default(), seed).unwrap();
            assert_eq!(counts(&m, 0), [7, 1, 2]);
        }
    }

    #[test]
    fn deepship_sized_split_adheres_to_ratios() {
        let (src, names) = sources(&[152, 152, 152, 153]);
        let m = split_dataset(&src, &names, SplitRatios::default(), 7).unwrap();
        assert_eq!(m.entries.len(), 609);
        let mut totals = [0usize; 3];
        for c in 0..4 {
            let n = if c == 3 { 153.0 } else { 152.0 };
            let got = counts(&m, c);
            for (k, ideal) in [0.7 * n, 0.1 * n, 0.2 * n].iter().enumerate() {
                assert!((got[k] as f64 - ideal).abs() <= 1.0, "class {c} split {k}: {} vs {ideal}", got[k]);
                totals[k] += got[k];
            }
        }
        assert_eq!(totals.iter().sum::<usize>(), 609);
        // within one source per class of the 426/61/122 ideal
        for (k, ideal) in [426.3, 60.9, 121.8].iter().enumerate() {
            assert!((totals[k] as f64 - ideal).abs() <= 4.0);
        }
    }

    #[test]
    fn deterministic_and_source_level() {
        let (src, names) = sources(&[12, 9, 30]);
        let a = split_dataset(&src, &names, SplitRatios::default(), 42).unwrap();
        let b = split_dataset(&src, &names, SplitRatios::default(), 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_jsonl(), b.to_jsonl());
        let ids: Vec<HashSet<&str>> =
            Split::ALL.iter().map(|&s| a.split(s).map(|e| e.id.as_str()).collect()).collect();
        for i in 0..3 {
            for j in (i + 1)..3 {
                assert!(ids[i].is_disjoint(&ids[j]));
            }
        }
        let c = split_dataset(&src, &names, SplitRatios::default(), 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn too_few_sources_is_a_stratification_error() {
        let (src, names) = sources(&[5, 2]);
        match split_dataset(&src, &names, SplitRatios::default(), 0) {
            Err(Error::Stratification { class, count }) => {
                assert_eq!(class, "class1");
                assert_eq!(count, 2);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn ratios_must_sum_to_one() {
        let (src, names) = sources(&[5]);
        let bad = SplitRatios { train: 0.7, val: 0.2, test: 0.2 };
        assert!(matches!(split_dataset(&src, &names, bad, 0), Err(Error::Config(_))));
    }

    #[test]
    fn jsonl_round_trip_and_version_check() {
        let (src, names) = sources(&[4, 6]);
        let m = split_dataset(&src, &names, SplitRatios::default(), 3).unwrap();
        let text = m.to_jsonl();
        assert_eq!(DatasetManifest::from_jsonl(&text).unwrap(), m);
        let bumped = text.replacen("\"schema_version\":1", "\"schema_version\":9", 1);
        assert!(matches!(DatasetManifest::from_jsonl(&bumped), Err(Error::Version { found: 9, .. })));
        assert_eq!(m.content_hash(), content_hash(text.as_bytes()));
        assert_eq!(m.content_hash().len(), 64);
    }
}
