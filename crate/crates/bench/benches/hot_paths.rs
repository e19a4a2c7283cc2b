use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use lungnet::metrics::{pr_curve, roc_curve};
use lungnet::nn::{build_transfer_model, Backbone, Tensor};
use lungnet::preprocess::{binary_open, BinaryMask};
use lungnet::ScoredSample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn tinynet_forward(c: &mut Criterion) {
    let mut group = c.benchmark_group("tinynet_forward");
    group.sample_size(10);
    for size in [64usize, 224] {
        let model = build_transfer_model(Backbone::tinynet([1, size, size], 0), true, 0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = Tensor::new(vec![1, 1, size, size], (0..size * size).map(|_| rng.gen::<f32>()).collect()).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(size), &x, |b, x| b.iter(|| model.infer(x).unwrap()));
    }
    group.finish();
}

fn opening(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let bits: Vec<bool> = (0..512 * 512).map(|_| rng.gen_bool(0.6)).collect();
    let mask = BinaryMask::new(512, 512, bits);
    let mut group = c.benchmark_group("binary_open_512");
    for side in [3usize, 5, 9] {
        group.bench_with_input(BenchmarkId::from_parameter(side), &side, |b, &s| b.iter(|| binary_open(&mask, s, 1)));
    }
    group.finish();
}

fn curves(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let samples: Vec<ScoredSample> = (0..100_000)
        .map(|_| ScoredSample::new(rng.gen::<f64>(), rng.gen_bool(0.5)))
        .collect();
    c.bench_function("roc_auc_100k", |b| b.iter(|| roc_curve(&samples).unwrap().auc));
    c.bench_function("average_precision_100k", |b| b.iter(|| pr_curve(&samples).unwrap().average_precision));
}

criterion_group!(benches, tinynet_forward, opening, curves);
criterion_main!(benches);
