use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fold_bench::{base_point, dirichlet, rhs_below_fold};
use fold_core::oracle::{brute_force_count, OracleConfig};
use fold_core::solve;

fn fiber_point(c: &mut Criterion) {
    let mut group = c.benchmark_group("fiber_point");
    for n in [16, 64, 128] {
        let prob = dirichlet(n);
        let z = base_point(&prob);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| prob.fiber_point(black_box(&z), black_box(1.5)).unwrap())
        });
    }
    group.finish();
}

fn fold_apex(c: &mut Criterion) {
    let mut group = c.benchmark_group("fold_apex");
    for n in [16, 64] {
        let prob = dirichlet(n);
        let z = base_point(&prob);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| prob.fold_apex(black_box(&z)).unwrap())
        });
    }
    group.finish();
}

fn solve_two(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve");
    for n in [16, 64] {
        let prob = dirichlet(n);
        let g = rhs_below_fold(&prob, &base_point(&prob), 1.0);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| solve(&prob, black_box(&g)).unwrap())
        });
    }
    group.finish();
}

fn oracle(c: &mut Criterion) {
    let prob = dirichlet(16);
    let g = rhs_below_fold(&prob, &base_point(&prob), 1.0);
    let cfg = OracleConfig::default();
    let mut group = c.benchmark_group("brute_force_count");
    group.sample_size(10);
    group.bench_function("16", |b| b.iter(|| brute_force_count(&prob, black_box(&g), &cfg).unwrap()));
    group.finish();
}

criterion_group!(benches, fiber_point, fold_apex, solve_two, oracle);
criterion_main!(benches);
