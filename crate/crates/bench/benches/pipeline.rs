use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use cvmdi_bench::{ideal_point, small_sweep};
use cvmdi_core::mc::Quadrature;
use cvmdi_core::{
    asymptotic_rate, build_pre_measurement_state, discrete_entropy_exact, equivalent_cm, key_length,
    relay_and_displace, sample_correlated, AdcSpec,
};
use std::hint::black_box;

fn key_rate(c: &mut Criterion) {
    let f = ideal_point();
    let mut group = c.benchmark_group("key_rate");
    group.bench_function("key_length", |b| {
        b.iter(|| key_length(black_box(&f.scenario), &f.adc, &f.budget, &f.finite, &f.reconciliation))
    });
    group.bench_function("asymptotic_rate", |b| {
        b.iter(|| asymptotic_rate(black_box(&f.scenario), &f.adc, &f.budget, &f.reconciliation))
    });
    group.finish();
}

fn covariance(c: &mut Criterion) {
    let f = ideal_point();
    let g = f.scenario.gain().expect("optimal gain");
    let mut group = c.benchmark_group("covariance");
    group.bench_function("symplectic_relay", |b| {
        b.iter(|| {
            let pre = build_pre_measurement_state(black_box(&f.scenario)).expect("state");
            relay_and_displace(&pre, g)
        })
    });
    group.bench_function("exact_binned_entropy", |b| {
        let adc = AdcSpec::new(52.0, 13).expect("valid ADC");
        b.iter(|| discrete_entropy_exact(black_box(2.3), &adc))
    });
    group.finish();
}

fn sampling(c: &mut Criterion) {
    let cm = equivalent_cm(5.04, 0.8, 0.005).expect("physical matrix");
    let mut group = c.benchmark_group("sample_correlated");
    for count in [10_000usize, 1_000_000] {
        group.throughput(Throughput::Elements(count as u64));
        group.bench_with_input(BenchmarkId::from_parameter(count), &count, |b, &n| {
            b.iter(|| sample_correlated(&cm, n, 7, Quadrature::X))
        });
    }
    group.finish();
}

fn sweep(c: &mut Criterion) {
    let mut group = c.benchmark_group("sweep");
    group.sample_size(20);
    for points in [16usize, 64] {
        let cfg = small_sweep(points);
        group.throughput(Throughput::Elements(points as u64));
        group.bench_with_input(BenchmarkId::new("serial", points), &cfg, |b, cfg| {
            b.iter(|| cvmdi_cli::run_sweep(cfg, Some(1)))
        });
        group.bench_with_input(BenchmarkId::new("parallel", points), &cfg, |b, cfg| {
            b.iter(|| cvmdi_cli::run_sweep(cfg, None))
        });
    }
    group.finish();
}

criterion_group!(benches, key_rate, covariance, sampling, sweep);
criterion_main!(benches);
