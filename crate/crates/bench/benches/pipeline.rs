//! Hot-path timings: dataset generation, one training epoch, the forward
//! pass, ranking metrics, the risk curve, and relation-matrix assembly.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use noisy_distill_core::datagen::{generate, NoiseConfig, SplitSelector, SyntheticSpec};
use noisy_distill_core::eval::{mean_average_precision, ScoreMatrix};
use noisy_distill_core::kgraph::build_relation_matrix;
use noisy_distill_core::labels::FixedTargetProvider;
use noisy_distill_core::model::{train, TrainConfig};
use noisy_distill_core::risk::{lambda_grid, risk_curve, LabeledCollection};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small_spec() -> SyntheticSpec {
    SyntheticSpec {
        samples: 600,
        noise: NoiseConfig {
            flip_rate: 0.3,
            sibling_bias: 0.7,
            background_fraction: 0.1,
            seed: 5,
        },
        ..SyntheticSpec::default()
    }
}

fn bench_generate(c: &mut Criterion) {
    let spec = small_spec();
    c.bench_function("generate_600_records", |b| {
        b.iter(|| generate(black_box(&spec)).unwrap())
    });
}

fn bench_train_epoch(c: &mut Criterion) {
    let (data, _) = generate(&small_spec()).unwrap();
    let cfg = TrainConfig { epochs: 1, batch_size: 32, seed: 1, ..TrainConfig::default() };
    c.bench_function("train_one_epoch", |b| {
        b.iter(|| {
            let mut provider =
                FixedTargetProvider::from_observed(&data, SplitSelector::TrainPool);
            train(
                black_box(&data),
                SplitSelector::TrainPool,
                &[32],
                &mut provider,
                &cfg,
            )
            .unwrap()
        })
    });
}

fn bench_forward(c: &mut Criterion) {
    let (data, _) = generate(&small_spec()).unwrap();
    let cfg = TrainConfig { epochs: 1, batch_size: 32, seed: 1, ..TrainConfig::default() };
    let mut provider = FixedTargetProvider::from_observed(&data, SplitSelector::TrainPool);
    let (model, _) = train(&data, SplitSelector::TrainPool, &[64], &mut provider, &cfg).unwrap();
    let x = data.records[0].x.clone();
    c.bench_function("forward_16_64_16", |b| {
        b.iter(|| model.forward(black_box(&x)).unwrap())
    });
}

fn bench_map(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let n = 2000;
    let l = 16;
    let scores: Vec<Vec<f64>> =
        (0..n).map(|_| (0..l).map(|_| rng.gen::<f64>()).collect()).collect();
    let truth: Vec<Vec<u8>> =
        (0..n).map(|_| (0..l).map(|_| u8::from(rng.gen_bool(0.2))).collect()).collect();
    let sm = ScoreMatrix::new(scores, truth).unwrap();
    c.bench_function("mean_average_precision_2000x16", |b| {
        b.iter(|| mean_average_precision(black_box(&sm)).unwrap())
    });
}

fn bench_risk_curve(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 10_000;
    let l = 10;
    let truth: Vec<Vec<f64>> =
        (0..n).map(|_| (0..l).map(|_| f64::from(rng.gen_bool(0.3))).collect()).collect();
    let y: Vec<Vec<f64>> = truth
        .iter()
        .map(|t| t.iter().map(|&v| if rng.gen_bool(0.3) { 1.0 - v } else { v }).collect())
        .collect();
    let s: Vec<Vec<f64>> = truth
        .iter()
        .map(|t| t.iter().map(|&v| v + rng.gen_range(-0.35..0.35)).collect())
        .collect();
    let yc = LabeledCollection::new(y, truth.clone()).unwrap();
    let sc = LabeledCollection::new(s, truth).unwrap();
    let grid = lambda_grid(101).unwrap();
    c.bench_function("risk_curve_10000x10_101pts", |b| {
        b.iter(|| risk_curve(black_box(&yc), black_box(&sc), &grid).unwrap())
    });
}

fn bench_relation_matrix(c: &mut Criterion) {
    let (data, graph) = generate(&SyntheticSpec::default()).unwrap();
    c.bench_function("relation_matrix_16_labels", |b| {
        b.iter(|| build_relation_matrix(black_box(&graph), &data.labels, 0.4).unwrap())
    });
}

criterion_group!(
    benches,
    bench_generate,
    bench_train_epoch,
    bench_forward,
    bench_map,
    bench_risk_curve,
    bench_relation_matrix
);
criterion_main!(benches);
