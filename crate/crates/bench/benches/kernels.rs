use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use vmfe_bench::fixture;
use vmfe_core::estimation::{fixed_point_step, gradients};
use vmfe_core::{bessel_ratio, inverse_bessel_ratio, log_bessel_i, log_likelihood, seeded_rng, BesselOrder, GeneratorKind};

fn special(c: &mut Criterion) {
    let mut g = c.benchmark_group("special");
    let order = BesselOrder::new(3.0).unwrap();
    for tau in [0.1, 14.0, 150.0] {
        g.bench_with_input(BenchmarkId::new("log_bessel", tau), &tau, |b, &tau| {
            b.iter(|| log_bessel_i(order, black_box(tau)))
        });
        g.bench_with_input(BenchmarkId::new("bessel_ratio", tau), &tau, |b, &tau| {
            b.iter(|| bessel_ratio(8, black_box(tau)))
        });
    }
    for r in [0.05, 0.5, 0.95] {
        g.bench_with_input(BenchmarkId::new("inverse_bessel_ratio", r), &r, |b, &r| {
            b.iter(|| inverse_bessel_ratio(8, black_box(r)))
        });
    }
    g.finish();
}

fn likelihood(c: &mut Criterion) {
    let mut g = c.benchmark_group("likelihood");
    for m in [2, 8, 32] {
        let (p, data) = fixture(m, 1000, GeneratorKind::Cauchy);
        g.bench_with_input(BenchmarkId::new("log_likelihood", m), &m, |b, _| {
            b.iter(|| log_likelihood(black_box(&data), &p))
        });
        g.bench_with_input(BenchmarkId::new("gradients", m), &m, |b, _| {
            b.iter(|| gradients(black_box(&data), &p))
        });
        g.bench_with_input(BenchmarkId::new("fixed_point_step", m), &m, |b, _| {
            b.iter(|| fixed_point_step(black_box(&data), &p))
        });
    }
    g.finish();
}

fn sampling(c: &mut Criterion) {
    let mut g = c.benchmark_group("sampling");
    for m in [2, 8, 32] {
        let (p, _) = fixture(m, 1, GeneratorKind::Gaussian);
        let mut rng = seeded_rng(1);
        g.bench_with_input(BenchmarkId::new("sample_1000", m), &m, |b, _| b.iter(|| p.sample(1000, &mut rng)));
    }
    g.finish();
}

criterion_group!(benches, special, likelihood, sampling);
criterion_main!(benches);
