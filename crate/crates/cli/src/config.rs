//! Run configuration: a TOML file with one table per stage, overridden by command-line flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use nehd::eval::GridSpec;
use nehd::ingest::{content_hash, SplitRatios, DEFAULT_SAMPLE_RATE, DEFAULT_SEGMENT_SECONDS};
use nehd::nehd::{EdgeInit, HistInit, PoolWindow};
use nehd::synth::SynthSpec;
use nehd::{ModelConfig, ModelKind, StftConfig, TrainConfig};

use crate::CliError;

/// Environment variable naming the directory that relative paths are resolved against.
pub const OUTPUT_ROOT_ENV: &str = "NEHD_OUTPUT_ROOT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub manifest: Option<PathBuf>,
    pub sample_rate: u32,
    pub segment_seconds: f64,
    /// Train/val/test proportions used when writing a manifest.
    pub ratios: SplitRatios,
}

impl Default for DataSection {
    fn default() -> Self {
        DataSection {
            manifest: None,
            sample_rate: DEFAULT_SAMPLE_RATE,
            segment_seconds: DEFAULT_SEGMENT_SECONDS,
            ratios: SplitRatios::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub variant: ModelKind,
    pub edges: usize,
    pub bins: usize,
    pub pool_rows: usize,
    pub pool_cols: usize,
    pub edge_init: EdgeInit,
    pub hist_init: HistInit,
}

impl Default for ModelSection {
    fn default() -> Self {
        let m = ModelConfig::new(ModelKind::Nehd);
        ModelSection {
            variant: m.kind,
            edges: m.edges,
            bins: m.bins,
            pool_rows: m.pool.rows,
            pool_cols: m.pool.cols,
            edge_init: m.edge_init,
            hist_init: m.hist_init,
        }
    }
}

impl ModelSection {
    pub fn model_config(&self, kind: ModelKind, freq_bins: usize, frames: usize, classes: usize) -> ModelConfig {
        ModelConfig {
            kind,
            freq_bins,
            frames,
            classes,
            edges: self.edges,
            edge_init: self.edge_init,
            bins: self.bins,
            pool: PoolWindow::new(self.pool_rows, self.pool_cols),
            hist_init: self.hist_init,
        }
    }
}

/// Everything a run depends on. `seed` drives corpus generation, splitting, initialization
/// and batch order; the per-stage seed fields are overwritten with it.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub data: DataSection,
    pub synth: SynthSpec,
    pub stft: StftConfig,
    pub model: ModelSection,
    pub train: TrainConfig,
    pub grid: GridSpec,
}

/// A config file after parsing, remembering which tables it set explicitly.
pub struct Loaded {
    pub config: RunConfig,
    pub explicit_stft: bool,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Loaded, CliError> {
        let Some(path) = path else {
            return Ok(Loaded { config: RunConfig::default(), explicit_stft: false });
        };
        let text = std::fs::read_to_string(path).map_err(|e| nehd::Error::io(path, e))?;
        let table: toml::Table =
            text.parse().map_err(|e: toml::de::Error| CliError::Toml { path: path.to_path_buf(), detail: e.message().to_string() })?;
        let explicit_stft = table.contains_key("stft");
        let config: RunConfig =
            toml::from_str(&text).map_err(|e| CliError::Toml { path: path.to_path_buf(), detail: e.message().to_string() })?;
        Ok(Loaded { config, explicit_stft })
    }

    /// Propagate the top-level seed and split ratios into every stage.
    pub fn sync_seeds(&mut self) {
        self.synth.seed = self.seed;
        self.synth.ratios = self.data.ratios;
        self.train.seed = self.seed;
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    pub fn hash(&self) -> String {
        content_hash(self.to_toml().as_bytes())
    }
}

/// The snapshot written beside every run's outputs.
#[derive(Debug, Serialize)]
pub struct Snapshot<'a> {
    pub tool_version: &'static str,
    pub subcommand: &'a str,
    pub seed: u64,
    pub config_hash: String,
    pub manifest_hash: Option<String>,
    pub config: &'a RunConfig,
}

pub const SNAPSHOT_FILE: &str = "run.toml";

pub fn write_snapshot(dir: &Path, subcommand: &str, config: &RunConfig, manifest_hash: Option<String>) -> Result<(), CliError> {
    let snap = Snapshot {
        tool_version: env!("CARGO_PKG_VERSION"),
        subcommand,
        seed: config.seed,
        config_hash: config.hash(),
        manifest_hash,
        config,
    };
    let text = toml::to_string(&snap).expect("snapshot serializes");
    let path = dir.join(SNAPSHOT_FILE);
    std::fs::write(&path, text).map_err(|e| nehd::Error::io(path, e))?;
    Ok(())
}

/// Resolve `p` against `$NEHD_OUTPUT_ROOT` unless it is absolute.
pub fn resolve_path(p: &Path) -> PathBuf {
    if p.is_absolute() {
        return p.to_path_buf();
    }
    match std::env::var_os(OUTPUT_ROOT_ENV) {
        Some(root) if !root.is_empty() => PathBuf::from(root).join(p),
        _ => p.to_path_buf(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let c = RunConfig::default();
        let back: RunConfig = toml::from_str(&c.to_toml()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn partial_file_keeps_other_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.toml");
        std::fs::write(&path, "seed = 4\n[train]\nepochs = 7\n[model]\nvariant = \"edge_only\"\n").unwrap();
        let loaded = RunConfig::load(Some(&path)).unwrap();
        assert_eq!(loaded.config.seed, 4);
        assert_eq!(loaded.config.train.epochs, 7);
        assert_eq!(loaded.config.train.batch_size, 128);
        assert_eq!(loaded.config.model.variant, ModelKind::EdgeOnly);
        assert!(!loaded.explicit_stft);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.toml");
        std::fs::write(&path, "[train]\nepoch = 7\n").unwrap();
        assert!(matches!(RunConfig::load(Some(&path)), Err(CliError::Toml { .. })));
    }
}
