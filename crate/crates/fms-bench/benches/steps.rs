use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use fms_bench::diffuse_set;
use fms_core::{
    average_density, bfms_step, estimate_tau, make_partition, subset_ms_operator, KernelConfig,
};

fn bench_full_step(c: &mut Criterion) {
    let mut group = c.benchmark_group("bfms_step");
    group.sample_size(10);
    for &n in &[256usize, 1024] {
        let set = diffuse_set(n, 50, 7);
        let cfg = KernelConfig::new(1.0, 1e9).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &set, |b, set| {
            b.iter(|| black_box(bfms_step(set, &cfg)));
        });
    }
    group.finish();
}

fn bench_stochastic_sweep(c: &mut Criterion) {
    let mut group = c.benchmark_group("subset_sweep");
    group.sample_size(10);
    let n = 1024;
    let set = diffuse_set(n, 50, 7);
    let cfg = KernelConfig::new(1.0, 1e9).unwrap();
    for &subset in &[64usize, 256] {
        let m = n / subset;
        let plan = make_partition(n, m, 0, 11).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(subset), &plan, |b, plan| {
            b.iter(|| {
                for i in 0..n {
                    black_box(subset_ms_operator(i, &set, plan, &cfg));
                }
            });
        });
    }
    group.finish();
}

fn bench_density_and_tau(c: &mut Criterion) {
    let set = diffuse_set(512, 50, 7);
    let cfg = KernelConfig::new(1.0, 1e9).unwrap();
    c.bench_function("average_density_512", |b| {
        b.iter(|| black_box(average_density(&set, &cfg)))
    });
    c.bench_function("estimate_tau_512", |b| {
        b.iter(|| black_box(estimate_tau(&set, 200, 20.0, 3).unwrap()))
    });
}

criterion_group!(
    benches,
    bench_full_step,
    bench_stochastic_sweep,
    bench_density_and_tau
);
criterion_main!(benches);
