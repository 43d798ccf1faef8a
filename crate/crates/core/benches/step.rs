use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;
use tdkit::{FeatureVector, TdConfig, TdLearner, Variant};

fn dense(n: usize, shift: usize) -> FeatureVector {
    FeatureVector::dense((0..n).map(|i| (((i + shift) % 7) as f64 - 3.0) / 10.0).collect())
}

fn step(c: &mut Criterion) {
    let mut group = c.benchmark_group("step");
    for n in [100usize, 10_000] {
        let (phi, phi2) = (dense(n, 0), dense(n, 3));
        let (sp, sp2) = (
            FeatureVector::binary(n, (0..9).map(|i| i * (n / 9)).collect()).unwrap(),
            FeatureVector::binary(n, (0..9).map(|i| i * (n / 9) + 1).collect()).unwrap(),
        );
        for variant in Variant::ALL {
            let cfg = TdConfig::new(variant, 0.001, 0.9, 0.99);
            if !variant.needs_binary_features() {
                group.bench_with_input(BenchmarkId::new(format!("{variant}/dense"), n), &n, |b, &n| {
                    let mut td = TdLearner::new(cfg.clone(), n).unwrap();
                    b.iter(|| td.step(black_box(&phi), 0.5, black_box(&phi2), false).unwrap())
                });
            }
            group.bench_with_input(BenchmarkId::new(format!("{variant}/sparse9"), n), &n, |b, &n| {
                let mut td = TdLearner::new(cfg.clone(), n).unwrap();
                b.iter(|| td.step(black_box(&sp), 0.5, black_box(&sp2), false).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, step);
criterion_main!(benches);
