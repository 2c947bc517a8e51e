use ndarray::{Array2, ArrayD, IxDyn};

use super::Spectrogram;
use crate::error::{Error, Result};

pub const NORM_EPSILON: f64 = 1e-8;

/// Per-frequency-bin mean and standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl NormStats {
    /// `[2, bins]` tensor: row 0 the means, row 1 the standard deviations.
    pub fn to_tensor(&self) -> ArrayD<f64> {
        let mut flat = self.mean.clone();
        flat.extend_from_slice(&self.std);
        ArrayD::from_shape_vec(IxDyn(&[2, self.mean.len()]), flat).expect("mean and std have equal length")
    }
}

/// Streaming per-bin statistics (Welford), mergeable across partitions.
#[derive(Debug, Clone, Default)]
pub struct NormAccumulator {
    count: Vec<u64>,
    mean: Vec<f64>,
    m2: Vec<f64>,
    spectrograms: usize,
}

impl NormAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, values: &Array2<f64>) -> Result<()> {
        let bins = values.nrows();
        if self.spectrograms == 0 {
            self.count = vec![0; bins];
            self.mean = vec![0.0; bins];
            self.m2 = vec![0.0; bins];
        } else if bins != self.mean.len() {
            return Err(Error::shape(format!("expected {} bins, got {bins}", self.mean.len())));
        }
        for (b, row) in values.rows().into_iter().enumerate() {
            for &v in row {
                self.count[b] += 1;
                let delta = v - self.mean[b];
                self.mean[b] += delta / self.count[b] as f64;
                self.m2[b] += delta * (v - self.mean[b]);
            }
        }
        self.spectrograms += 1;
        Ok(())
    }

    /// Combine with statistics gathered over a disjoint partition.
    pub fn merge(&mut self, other: &NormAccumulator) -> Result<()> {
        if other.spectrograms == 0 {
            return Ok(());
        }
        if self.spectrograms == 0 {
            *self = other.clone();
            return Ok(());
        }
        if self.mean.len() != other.mean.len() {
            return Err(Error::shape("cannot merge statistics with different bin counts"));
        }
        for b in 0..self.mean.len() {
            let (na, nb) = (self.count[b] as f64, other.count[b] as f64);
            let n = na + nb;
            let delta = other.mean[b] - self.mean[b];
            self.mean[b] += delta * nb / n;
            self.m2[b] += other.m2[b] + delta * delta * na * nb / n;
            self.count[b] += other.count[b];
        }
        self.spectrograms += other.spectrograms;
        Ok(())
    }

    pub fn finish(&self) -> Result<NormStats> {
        if self.spectrograms < 2 {
            return Err(Error::Data(format!(
                "normalizer needs at least 2 spectrograms, got {}",
                self.spectrograms
            )));
        }
        let std = self
            .m2
            .iter()
            .zip(&self.count)
            .map(|(m2, &n)| (m2 / n as f64).sqrt().max(NORM_EPSILON))
            .collect();
        Ok(NormStats { mean: self.mean.clone(), std })
    }
}

/// Population mean/std per bin over every frame of the given spectrograms.
pub fn fit_normalizer<'a>(specs: impl IntoIterator<Item = &'a Spectrogram>) -> Result<NormStats> {
    let mut acc = NormAccumulator::new();
    for s in specs {
        acc.push(&s.values)?;
    }
    acc.finish()
}

pub fn normalize(s: &Spectrogram, stats: &NormStats) -> Result<Spectrogram> {
    if s.freq_bins() != stats.mean.len() {
        return Err(Error::shape(format!(
            "spectrogram has {} bins, statistics have {}",
            s.freq_bins(),
            stats.mean.len()
        )));
    }
    let mut out = s.clone();
    for (b, mut row) in out.values.rows_mut().into_iter().enumerate() {
        row.mapv_inplace(|v| (v - stats.mean[b]) / stats.std[b]);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn spec(values: Array2<f64>) -> Spectrogram {
        Spectrogram::from_values(values)
    }

    fn random_specs(n: usize, seed: u64) -> Vec<Spectrogram> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| spec(Array2::from_shape_fn((6, 5), |(b, _)| rng.random_range(-3.0..3.0) * (b + 1) as f64 + b as f64)))
            .collect()
    }

    fn denormalize(s: &Spectrogram, stats: &NormStats) -> Spectrogram {
        let mut out = s.clone();
        for (b, mut row) in out.values.rows_mut().into_iter().enumerate() {
            row.mapv_inplace(|v| v * stats.std[b] + stats.mean[b]);
        }
        out
    }

    #[test]
    fn two_point_statistics() {
        let specs = [spec(Array2::zeros((3, 4))), spec(Array2::from_elem((3, 4), 2.0))];
        let st = fit_normalizer(&specs).unwrap();
        assert_eq!(st.mean, vec![1.0; 3]);
        assert_eq!(st.std, vec![1.0; 3]);
    }

    #[test]
    fn constant_input_clamps_std() {
        let specs = vec![spec(Array2::from_elem((2, 3), 5.0)); 3];
        let st = fit_normalizer(&specs).unwrap();
        assert_eq!(st.std, vec![NORM_EPSILON; 2]);
    }

    #[test]
    fn too_few_inputs() {
        assert!(fit_normalizer(std::iter::empty()).is_err());
        assert!(fit_normalizer(&[spec(Array2::zeros((2, 2)))]).is_err());
    }

    #[test]
    fn streaming_matches_two_pass() {
        let specs = random_specs(17, 3);
        let st = fit_normalizer(&specs).unwrap();
        for b in 0..6 {
            let vals: Vec<f64> = specs.iter().flat_map(|s| s.values.row(b).to_vec()).collect();
            let n = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / n;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            assert!((st.mean[b] - mean).abs() < 1e-10);
            assert!((st.std[b] - var.sqrt()).abs() < 1e-10);
        }
    }

    #[test]
    fn merged_partitions_match_single_pass() {
        let specs = random_specs(11, 8);
        let whole = fit_normalizer(&specs).unwrap();
        let mut a = NormAccumulator::new();
        let mut b = NormAccumulator::new();
        for s in &specs[..4] {
            a.push(&s.values).unwrap();
        }
        for s in &specs[4..] {
            b.push(&s.values).unwrap();
        }
        a.merge(&b).unwrap();
        let merged = a.finish().unwrap();
        for i in 0..6 {
            assert!((merged.mean[i] - whole.mean[i]).abs() < 1e-10);
            assert!((merged.std[i] - whole.std[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn normalized_fit_set_has_zero_mean() {
        let specs = random_specs(9, 1);
        let st = fit_normalizer(&specs).unwrap();
        let normed: Vec<Spectrogram> = specs.iter().map(|s| normalize(s, &st).unwrap()).collect();
        let again = fit_normalizer(&normed).unwrap();
        assert!(again.mean.iter().all(|m| m.abs() < 1e-8));
        assert!(again.std.iter().all(|s| (s - 1.0).abs() < 1e-8));
    }

    #[test]
    fn identity_stats_and_round_trip() {
        let s = &random_specs(1, 5)[0];
        let id = NormStats { mean: vec![0.0; 6], std: vec![1.0; 6] };
        assert_eq!(normalize(s, &id).unwrap(), *s);
        let st = NormStats { mean: (0..6).map(|i| i as f64 * 0.3).collect(), std: (1..7).map(|i| i as f64).collect() };
        let back = denormalize(&normalize(s, &st).unwrap(), &st);
        for (a, b) in back.values.iter().zip(s.values.iter()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn shape_mismatch() {
        let st = NormStats { mean: vec![0.0; 3], std: vec![1.0; 3] };
        assert!(matches!(normalize(&spec(Array2::zeros((4, 2))), &st), Err(Error::Shape(_))));
    }
}
