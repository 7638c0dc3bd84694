use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use propset_bench::heat;
use propset_core::pde::{self, SolveMethod};

fn discretize(c: &mut Criterion) {
    let case = heat();
    let mut g = c.benchmark_group("discretize");
    for h in [0.05, 0.025, 0.0125] {
        let grid = case.grid(h);
        g.bench_with_input(BenchmarkId::from_parameter(h), &grid, |b, grid| {
            b.iter(|| pde::discretize(&case.op, grid).unwrap())
        });
    }
    g.finish();
}

fn solve(c: &mut Criterion) {
    let case = heat();
    let mut g = c.benchmark_group("solve_heat");
    g.sample_size(10);
    for h in [0.05, 0.025] {
        let (l, _, _) = case.discrete(h, &[0.0, 0.0], 0.0);
        let data = l.boundary_values(|x| (x[0] + x[1]).exp());
        for (name, method) in [("jacobi", SolveMethod::Jacobi), ("direct", SolveMethod::Direct)] {
            g.bench_with_input(BenchmarkId::new(name, h), &data, |b, data| {
                b.iter(|| pde::solve_with(&l, data, 1e-10, 1_000_000, method).unwrap())
            });
        }
    }
    g.finish();
}

fn harnack(c: &mut Criterion) {
    let case = heat();
    let mut g = c.benchmark_group("harnack_heat");
    g.sample_size(10);
    for h in [0.05, 0.025] {
        let (l, x0, k) = case.discrete(h, &[0.0, -0.5], 0.25);
        g.bench_with_input(BenchmarkId::from_parameter(h), &k, |b, k| {
            b.iter(|| black_box(pde::harnack_ratio(&l, x0, k, 1e-12).unwrap()))
        });
    }
    g.finish();
}

criterion_group!(benches, discretize, solve, harnack);
criterion_main!(benches);
