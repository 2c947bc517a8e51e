use super::{Segment, Waveform};

/// Cut a waveform into consecutive non-overlapping windows. The trailing remainder is dropped;
/// a waveform shorter than one window yields no segments.
pub fn segment(w: &Waveform, window_seconds: f64, source_id: &str, label: usize) -> Vec<Segment> {
    if window_seconds.is_nan() || window_seconds <= 0.0 {
        return Vec::new();
    }
    let len = (window_seconds * w.sample_rate as f64).round() as usize;
    if len == 0 {
        return Vec::new();
    }
    w.samples
        .chunks_exact(len)
        .enumerate()
        .map(|(i, chunk)| Segment {
            samples: chunk.to_vec(),
            sample_rate: w.sample_rate,
            source_id: source_id.to_string(),
            offset_seconds: (i * len) as f64 / w.sample_rate as f64,
            label,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn wave(seconds: f64, rate: u32) -> Waveform {
        Waveform::new(vec![0.0; (seconds * rate as f64).round() as usize], rate).unwrap()
    }

    #[test]
    fn ten_seconds_in_three_second_windows() {
        let segs = segment(&wave(10.0, 1000), 3.0, "a", 1);
        let offsets: Vec<f64> = segs.iter().map(|s| s.offset_seconds).collect();
        assert_eq!(offsets, vec![0.0, 3.0, 6.0]);
        assert!(segs.iter().all(|s| s.samples.len() == 3000 && s.label == 1 && s.source_id == "a"));
    }

    #[test]
    fn exact_and_short() {
        assert_eq!(segment(&wave(3.0, 16000), 3.0, "a", 0).len(), 1);
        assert!(segment(&wave(2.9, 16000), 3.0, "a", 0).is_empty());
    }

    proptest! {
        #[test]
        fn coverage_is_floor_of_duration(len in 0usize..5000, rate in 10u32..400, win in 0.5f64..4.0) {
            let w = Waveform { samples: vec![0.0; len], sample_rate: rate };
            let segs = segment(&w, win, "s", 0);
            let win_len = (win * rate as f64).round() as usize;
            let covered: usize = segs.iter().map(|s| s.samples.len()).sum();
            prop_assert_eq!(covered, (len / win_len) * win_len);
            prop_assert!(segs.iter().all(|s| s.samples.len() == win_len));
        }
    }
}
