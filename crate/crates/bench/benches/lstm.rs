use std::hint::black_box;

use chrono::NaiveDate;
use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use eadcast::data::FeatureWindow;
use eadcast::eval::{corr_coeff, mae};
use eadcast::rnn::{init_params, Architecture, InitScheme};
use eadcast::training::{train, TrainConfig};

fn window(offset: usize) -> Vec<Vec<f64>> {
    (0..14)
        .map(|t| {
            (0..4)
                .map(|j| (0.37 * (t + offset) as f64 + j as f64).sin() * 0.5 + 0.5)
                .collect()
        })
        .collect()
}

fn bench_network(c: &mut Criterion) {
    let model = init_params(Architecture::standard(4, 1), InitScheme::ScaledUniform, 0).unwrap();
    let w = window(0);
    c.bench_function("forward L=14", |b| b.iter(|| model.predict(black_box(&w)).unwrap()));
    c.bench_function("forward+backward L=14", |b| {
        b.iter(|| {
            let pass = model.forward(black_box(&w)).unwrap();
            model.backward(&pass, &[1.0]).unwrap()
        })
    });

    let anchor = NaiveDate::from_ymd_opt(2019, 1, 1).unwrap();
    let data: Vec<FeatureWindow> = (0..64)
        .map(|i| FeatureWindow {
            inputs: window(i),
            target: vec![(0.1 * i as f64).cos() * 0.5 + 0.5],
            anchor_date: anchor,
        })
        .collect();
    let cfg = TrainConfig {
        epochs: 1,
        ..TrainConfig::default()
    };
    c.bench_function("train epoch, 64 windows", |b| {
        b.iter_batched(
            || model.clone(),
            |m| train(m, &data, &cfg).unwrap(),
            BatchSize::SmallInput,
        )
    });
}

fn bench_metrics(c: &mut Criterion) {
    let u: Vec<f64> = (0..10_000).map(|i| 300.0 + 40.0 * (i as f64 * 0.01).sin()).collect();
    let v: Vec<f64> = u.iter().enumerate().map(|(i, x)| x + (i % 7) as f64 - 3.0).collect();
    c.bench_function("corr_coeff 10k", |b| {
        b.iter(|| corr_coeff(black_box(&u), black_box(&v)).unwrap())
    });
    c.bench_function("mae 10k", |b| b.iter(|| mae(black_box(&u), black_box(&v)).unwrap()));
}

criterion_group!(benches, bench_network, bench_metrics);
criterion_main!(benches);
