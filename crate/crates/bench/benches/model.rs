use std::hint::black_box;

use convemo::train::batch_gradient;
use convemo::System;
use convemo_bench::{dialogs, model};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn forward(c: &mut Criterion) {
    let mut group = c.benchmark_group("predict");
    let dialog = &dialogs(1, 10, 1)[0];
    for system in System::ALL {
        let m = model(system, 100, 4);
        group.bench_with_input(BenchmarkId::new("d100_len10", system), &m, |b, m| {
            b.iter(|| m.predict(black_box(dialog)).unwrap())
        });
    }
    group.finish();
}

fn backward(c: &mut Criterion) {
    let mut group = c.benchmark_group("loss_and_grad");
    for len in [4, 16, 64] {
        let dialog = &dialogs(1, len, 2)[0];
        let m = model(System::S5, 100, 4);
        group.bench_with_input(BenchmarkId::new("S5_d100", len), &len, |b, _| {
            b.iter(|| m.loss_and_grad(black_box(dialog), len as f64, None).unwrap())
        });
    }
    group.finish();
}

fn batch(c: &mut Criterion) {
    let data = dialogs(20, 8, 3);
    let refs: Vec<_> = data.iter().collect();
    let m = model(System::S5, 16, 2);
    c.bench_function("batch_gradient/S5_d16_20x8", |b| {
        b.iter(|| batch_gradient(&m, black_box(&refs), Some(7)).unwrap())
    });
}

criterion_group!(benches, forward, backward, batch);
criterion_main!(benches);
