//! Audio ingestion: decode, resample, segment and split recordings into a manifest.

mod manifest;
mod resample;
mod segment;
mod wav;

use std::path::Path;

pub use manifest::{
    content_hash, split_dataset, DatasetManifest, ManifestEntry, SourceRecord, Split, SplitRatios,
    MANIFEST_SCHEMA_VERSION,
};
pub use resample::resample;
pub use segment::segment;
pub use wav::{decode_wav, encode_wav, SampleFormat};

use crate::error::{Error, Result};

/// Default analysis rate. With a 6144/4096 STFT and centre padding a 3 s segment gives 12 frames.
pub const DEFAULT_SAMPLE_RATE: u32 = 16_000;
pub const DEFAULT_SEGMENT_SECONDS: f64 = 3.0;

/// Mono audio with its sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::config("sample rate must be positive"));
        }
        if samples.is_empty() {
            return Err(Error::Data("waveform has no samples".into()));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::Data("waveform contains non-finite samples".into()));
        }
        Ok(Waveform { samples, sample_rate })
    }

    pub fn duration_seconds(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

/// A fixed-length window of one recording.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
    pub source_id: String,
    pub offset_seconds: f64,
    pub label: usize,
}

impl Segment {
    pub fn duration_seconds(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

pub fn read_wav(path: &Path) -> Result<Waveform> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_wav(&bytes).map_err(|e| match e {
        Error::Decode { chunk, detail } => Error::Decode { chunk, detail: format!("{}: {detail}", path.display()) },
        other => other,
    })
}

pub fn write_wav(path: &Path, w: &Waveform, format: SampleFormat) -> Result<()> {
    std::fs::write(path, encode_wav(w, format)).map_err(|e| Error::io(path, e))
}

/// Load, resample and segment one manifest entry.
pub fn load_segments(
    manifest: &DatasetManifest,
    base: &Path,
    entry: &ManifestEntry,
    sample_rate: u32,
    window_seconds: f64,
) -> Result<Vec<Segment>> {
    let w = read_wav(&manifest.resolve(base, entry))?;
    let w = resample(&w, sample_rate)?;
    Ok(segment(&w, window_seconds, &entry.id, entry.label))
}

/// Collect sources from a directory laid out as `<root>/<class name>/<file>.wav`.
///
/// Class names are the sorted subdirectory names; source ids are `<class>/<file stem>`.
pub fn scan_class_dirs(root: &Path) -> Result<(Vec<SourceRecord>, Vec<String>)> {
    let read_dir = |p: &Path| -> Result<Vec<std::fs::DirEntry>> {
        let mut v: Vec<_> = std::fs::read_dir(p)
            .map_err(|e| Error::io(p, e))?
            .collect::<std::io::Result<_>>()
            .map_err(|e| Error::io(p, e))?;
        v.sort_by_key(|e| e.file_name());
        Ok(v)
    };
    let mut class_names = Vec::new();
    let mut sources = Vec::new();
    for class_dir in read_dir(root)? {
        if !class_dir.path().is_dir() {
            continue;
        }
        let class = class_dir.file_name().to_string_lossy().into_owned();
        let label = class_names.len();
        for file in read_dir(&class_dir.path())? {
            let path = file.path();
            let is_wav = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("wav"));
            if !is_wav {
                continue;
            }
            let stem = path.file_stem().unwrap_or_default().to_string_lossy();
            let rel = path.strip_prefix(root).unwrap_or(&path).to_path_buf();
            sources.push(SourceRecord { id: format!("{class}/{stem}"), path: rel, label });
        }
        class_names.push(class);
    }
    if class_names.is_empty() {
        return Err(Error::Data(format!("no class directories under {}", root.display())));
    }
    Ok((sources, class_names))
}
