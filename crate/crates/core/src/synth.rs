//! Deterministic four-class corpus of sonar-like signals.
//!
//! Class recipes (all energy below ~450 Hz so it lands in the retained low STFT bins):
//!
//! 0. `tonal`: fundamental in 40-110 Hz plus three harmonics, stable over time.
//! 1. `chirp`: linear up-sweeps restarting every 0.5 s.
//! 2. `broadband`: Gaussian noise shaped to a spectral slope of -2 to -6 dB/octave above 50 Hz.
//! 3. `modulated`: a single carrier with 4-8 Hz amplitude modulation (propeller-like).
//!
//! Each source is mixed with white noise at `snr_db` (infinite disables the noise) and scaled
//! to a random peak level in [-1, 1].

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{split_dataset, write_wav, DatasetManifest, SampleFormat, SourceRecord, SplitRatios, Waveform};

pub const CLASS_NAMES: [&str; 4] = ["tonal", "chirp", "broadband", "modulated"];

/// Broadband sources are flat up to this frequency.
const SLOPE_KNEE_HZ: f64 = 50.0;

/// Highest peak amplitude of any generated source.
const MAX_PEAK: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub per_class_sources: usize,
    pub duration_seconds: f64,
    pub sample_rate: u32,
    pub seed: u64,
    pub snr_db: f64,
    /// Peak level of each source is drawn from `[-level_jitter_db, 0]` dB below [`MAX_PEAK`].
    pub level_jitter_db: f64,
    /// Split proportions for the manifest; not part of the serialized recipe.
    #[serde(skip)]
    pub ratios: SplitRatios,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            per_class_sources: 30,
            duration_seconds: 60.0,
            sample_rate: 16_000,
            seed: 0,
            snr_db: 10.0,
            level_jitter_db: 12.0,
            ratios: SplitRatios::default(),
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.per_class_sources < 3 {
            return Err(Error::config("per_class_sources must be at least 3"));
        }
        if self.duration_seconds.is_nan() || self.duration_seconds <= 0.0 || self.sample_rate == 0 {
            return Err(Error::config("duration and sample rate must be positive"));
        }
        if self.snr_db.is_nan() || self.snr_db == f64::NEG_INFINITY {
            return Err(Error::config("snr_db must be a number (use +inf to disable noise)"));
        }
        if self.level_jitter_db.is_nan() || self.level_jitter_db < 0.0 {
            return Err(Error::config("level_jitter_db must be non-negative"));
        }
        Ok(())
    }

    fn num_samples(&self) -> usize {
        (self.duration_seconds * self.sample_rate as f64).round() as usize
    }
}

/// The randomized parameters of one source.
#[derive(Debug, Clone, PartialEq)]
pub enum SourceRecipe {
    Tonal { fundamental_hz: f64, amplitudes: [f64; 4], phases: [f64; 4] },
    Chirp { start_hz: f64, stop_hz: f64, period_seconds: f64 },
    Broadband { slope_db_per_octave: f64 },
    Modulated { carrier_hz: f64, modulation_hz: f64, depth: f64 },
}

fn source_rng(spec: &SynthSpec, class_id: usize, source_index: usize) -> ChaCha8Rng {
    let mut seed = spec.seed ^ 0x5EED_0000_0000_0000;
    seed = seed.wrapping_mul(6364136223846793005).wrapping_add(class_id as u64 + 1);
    seed = seed.wrapping_mul(6364136223846793005).wrapping_add(source_index as u64 + 1);
    ChaCha8Rng::seed_from_u64(seed)
}

/// Draw the recipe of a source; also returns the rng positioned after the recipe draws.
fn draw_recipe(class_id: usize, spec: &SynthSpec, source_index: usize) -> Result<(SourceRecipe, ChaCha8Rng)> {
    let mut rng = source_rng(spec, class_id, source_index);
    let recipe = match class_id {
        0 => SourceRecipe::Tonal {
            fundamental_hz: rng.random_range(40.0..110.0),
            amplitudes: [1.0, 0.8, 0.6, 0.45],
            phases: [0.0; 4].map(|_: f64| rng.random_range(0.0..2.0 * PI)),
        },
        1 => {
            let start = rng.random_range(60.0..150.0);
            SourceRecipe::Chirp { start_hz: start, stop_hz: start + rng.random_range(150.0..300.0), period_seconds: 0.5 }
        }
        2 => SourceRecipe::Broadband { slope_db_per_octave: rng.random_range(-6.0..-2.0) },
        3 => SourceRecipe::Modulated {
            carrier_hz: rng.random_range(60.0..400.0),
            modulation_hz: rng.random_range(4.0..8.0),
            depth: rng.random_range(0.5..0.9),
        },
        _ => return Err(Error::config(format!("class id {class_id} out of range 0..4"))),
    };
    Ok((recipe, rng))
}

pub fn recipe(class_id: usize, spec: &SynthSpec, source_index: usize) -> Result<SourceRecipe> {
    Ok(draw_recipe(class_id, spec, source_index)?.0)
}

fn white(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

fn shaped_noise(n: usize, rate: f64, slope_db_per_octave: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut buf: Vec<Complex<f64>> = white(n, rng).into_iter().map(|v| Complex::new(v, 0.0)).collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    // flat below the knee, then falling by `slope_db_per_octave`; DC removed
    let exponent = slope_db_per_octave / (20.0 * 2f64.log10());
    for (k, v) in buf.iter_mut().enumerate() {
        let bin = k.min(n - k);
        let f = bin as f64 * rate / n as f64;
        *v *= if bin == 0 { 0.0 } else { (f / SLOPE_KNEE_HZ).max(1.0).powf(exponent) };
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    buf.iter().map(|c| c.re / n as f64).collect()
}

fn render(recipe: &SourceRecipe, n: usize, rate: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let t = |i: usize| i as f64 / rate;
    match *recipe {
        SourceRecipe::Tonal { fundamental_hz, amplitudes, phases } => (0..n)
            .map(|i| {
                (0..4)
                    .map(|h| amplitudes[h] * (2.0 * PI * (h + 1) as f64 * fundamental_hz * t(i) + phases[h]).sin())
                    .sum()
            })
            .collect(),
        SourceRecipe::Chirp { start_hz, stop_hz, period_seconds } => {
            let rate_hz_per_s = (stop_hz - start_hz) / period_seconds;
            (0..n)
                .map(|i| {
                    let tau = t(i) % period_seconds;
                    let phase = 2.0 * PI * (start_hz * tau + 0.5 * rate_hz_per_s * tau * tau);
                    // short raised-cosine taper at each restart
                    let edge = (tau / 0.01).min((period_seconds - tau) / 0.01).min(1.0);
                    edge * phase.sin()
                })
                .collect()
        }
        SourceRecipe::Broadband { slope_db_per_octave } => shaped_noise(n, rate, slope_db_per_octave, rng),
        SourceRecipe::Modulated { carrier_hz, modulation_hz, depth } => (0..n)
            .map(|i| {
                let env = 1.0 + depth * (2.0 * PI * modulation_hz * t(i)).sin();
                env * (2.0 * PI * carrier_hz * t(i)).sin()
            })
            .collect(),
    }
}

fn rms(x: &[f64]) -> f64 {
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

/// Render one source. Deterministic in `(spec.seed, class_id, source_index)`.
pub fn generate_source(class_id: usize, spec: &SynthSpec, source_index: usize) -> Result<Waveform> {
    spec.validate()?;
    let (recipe, mut rng) = draw_recipe(class_id, spec, source_index)?;
    let n = spec.num_samples();
    let rate = spec.sample_rate as f64;
    let mut x = render(&recipe, n, rate, &mut rng);
    let signal_rms = rms(&x).max(1e-12);
    x.iter_mut().for_each(|v| *v /= signal_rms);
    if spec.snr_db.is_finite() {
        let noise_rms = 10f64.powf(-spec.snr_db / 20.0);
        for (v, e) in x.iter_mut().zip(white(n, &mut rng)) {
            *v += noise_rms * e;
        }
    }
    let level_db = -rng.random_range(0.0..=spec.level_jitter_db);
    let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
    let gain = MAX_PEAK * 10f64.powf(level_db / 20.0) / peak;
    x.iter_mut().for_each(|v| *v *= gain);
    Waveform::new(x, spec.sample_rate)
}

/// Write `<out_dir>/<class>/<class>_<index>.wav` (float32) for every source plus
/// `<out_dir>/manifest.jsonl`.
pub fn build_corpus(spec: &SynthSpec, out_dir: &Path) -> Result<DatasetManifest> {
    spec.validate()?;
    let class_names: Vec<String> = CLASS_NAMES.iter().map(|s| s.to_string()).collect();
    let mut sources = Vec::new();
    for (class_id, name) in class_names.iter().enumerate() {
        let dir = out_dir.join(name);
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        for i in 0..spec.per_class_sources {
            let rel = Path::new(name).join(format!("{name}_{i:03}.wav"));
            let w = generate_source(class_id, spec, i)?;
            write_wav(&out_dir.join(&rel), &w, SampleFormat::Float32)?;
            sources.push(SourceRecord { id: format!("{name}_{i:03}"), path: rel, label: class_id });
        }
    }
    let manifest = split_dataset(&sources, &class_names, spec.ratios, spec.seed)?;
    manifest.write(&out_dir.join("manifest.jsonl"))?;
    Ok(manifest)
}
