use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use smnl::simulator::{experiment3, run_experiment};
use smnl::Execution;

fn replications(c: &mut Criterion) {
    let mut cfg = experiment3();
    cfg.horizon = 2_000;
    cfg.replications = 8;
    let mut group = c.benchmark_group("run_experiment");
    group.sample_size(10);
    for exec in [Execution::Sequential, Execution::Parallel] {
        group.bench_with_input(BenchmarkId::from_parameter(format!("{exec:?}")), &exec, |b, &exec| {
            b.iter(|| run_experiment(black_box(&cfg), exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, replications);
criterion_main!(benches);
