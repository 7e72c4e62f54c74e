use std::collections::HashSet;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use slotplace::baselines::greedy;
use slotplace::{build_and_solve, csa, rsa, run_sa2, LpOptions};
use slotplace_bench::bench_instance;

fn lp(c: &mut Criterion) {
    let mut group = c.benchmark_group("lp");
    group.sample_size(10);
    for users in [100, 400] {
        let inst = bench_instance(100, 5, users, 1);
        group.bench_with_input(BenchmarkId::from_parameter(users), &inst, |b, inst| {
            b.iter(|| build_and_solve(inst, &LpOptions::default()).unwrap())
        });
    }
    group.finish();
}

fn rounding(c: &mut Criterion) {
    let inst = bench_instance(100, 5, 400, 2);
    let sol = build_and_solve(&inst, &LpOptions::default()).unwrap();
    let mut group = c.benchmark_group("rounding");
    group.sample_size(10);
    group.bench_function("sa2", |b| b.iter(|| run_sa2(&inst, &sol).unwrap()));
    group.bench_function("csa", |b| b.iter(|| csa(&inst, &HashSet::new()).unwrap()));
    group.bench_function("greedy", |b| b.iter(|| greedy(&inst)));
    group.finish();
}

fn repeated(c: &mut Criterion) {
    let inst = bench_instance(100, 5, 200, 3);
    let mut group = c.benchmark_group("rsa");
    group.sample_size(10);
    group.bench_function("100x5x200", |b| b.iter(|| rsa(&inst).unwrap()));
    group.finish();
}

criterion_group!(benches, lp, rounding, repeated);
criterion_main!(benches);
