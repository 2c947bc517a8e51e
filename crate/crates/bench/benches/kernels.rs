use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use ndarray::{Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use nehd::model::{adam_step, build_model, AdamState, ModelConfig, ModelKind, TrainConfig};
use nehd::nehd::{conv2d_backward, conv2d_forward, init_edge_filters, init_histogram, EdgeInit, HistInit, PoolWindow, Wiring};
use nehd::spectral::{stft, StftConfig};
use nehd::Segment;

fn noise(r: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| r.random_range(-0.5..0.5)).collect()
}

fn bench_stft(c: &mut Criterion) {
    let mut r = ChaCha8Rng::seed_from_u64(0);
    let seg = Segment { samples: noise(&mut r, 48_000), sample_rate: 16_000, source_id: "bench".into(), offset_seconds: 0.0, label: 0 };
    let cfg = StftConfig::default();
    c.bench_function("stft_3s_default", |b| b.iter(|| stft(&seg, &cfg).unwrap()));
}

fn bench_conv(c: &mut Criterion) {
    let mut r = ChaCha8Rng::seed_from_u64(1);
    let fb = init_edge_filters(EdgeInit::Sobel, 8, 0).unwrap().edge_filters;
    let x = Array3::from_shape_simple_fn((1, 192, 12), || r.random_range(-1.0..1.0));
    let up = Array3::from_shape_simple_fn((8, 192, 12), || r.random_range(-1.0..1.0));
    c.bench_function("conv_forward_8x3x3", |b| b.iter(|| conv2d_forward(x.view(), &fb).unwrap()));
    c.bench_function("conv_backward_8x3x3", |b| b.iter(|| conv2d_backward(x.view(), &fb, up.view()).unwrap()));
}

fn bench_histogram(c: &mut Criterion) {
    let mut r = ChaCha8Rng::seed_from_u64(2);
    let h = init_histogram(8, 9, Wiring::Mixed, HistInit::default(), PoolWindow::new(4, 2)).unwrap();
    let x = Array3::from_shape_simple_fn((9, 192, 12), || r.random_range(0.0..1.0));
    let (out, cache) = h.forward_cached(x.view()).unwrap();
    let up = out.mapv(|_| r.random_range(-1.0..1.0));
    c.bench_function("histogram_forward", |b| b.iter(|| h.forward(x.view()).unwrap()));
    c.bench_function("histogram_backward", |b| b.iter(|| h.backward(&cache, up.view()).unwrap()));
}

fn bench_train_step(c: &mut Criterion) {
    let mut r = ChaCha8Rng::seed_from_u64(3);
    let batch: Vec<Array2<f64>> = (0..32).map(|_| Array2::from_shape_simple_fn((192, 12), || r.random_range(-1.0..1.0))).collect();
    let labels: Vec<usize> = (0..32).map(|i| i % 4).collect();
    let views: Vec<_> = batch.iter().map(|a| a.view()).collect();
    let adam = TrainConfig::default().adam();
    let mut group = c.benchmark_group("train_step_batch32");
    group.sample_size(10);
    for kind in [ModelKind::Linear, ModelKind::Nehd] {
        group.bench_function(kind.as_str(), |b| {
            b.iter_batched(
                || {
                    let m = build_model(ModelConfig::new(kind), 0).unwrap();
                    let s = AdamState::new(m.parameters().iter().map(|(_, t)| t.len()));
                    (m, s)
                },
                |(mut m, mut s)| {
                    let (_, g) = m.loss_and_gradients(&views, &labels).unwrap();
                    adam_step(&mut m.parameters_mut(), &g, &mut s, &adam).unwrap();
                    m
                },
                BatchSize::LargeInput,
            )
        });
    }
    group.finish();
}

criterion_group!(benches, bench_stft, bench_conv, bench_histogram, bench_train_step);
criterion_main!(benches);
