use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use hnls_bench::{grid, params};
use hnls_core::ground_state::{gradient_flow_minimize, shooting_solve, solve_fixed_lambda, SolverOptions};
use hnls_core::NonlinearitySpec;

fn fixed_lambda(c: &mut Criterion) {
    let mut group = c.benchmark_group("fixed_lambda");
    group.sample_size(10);
    let params = params(3, 2.0, 1.0);
    let spec = NonlinearitySpec::power(2.0);
    for h in [0.04, 0.02, 0.01] {
        let grid = grid(&params, h);
        group.bench_with_input(BenchmarkId::from_parameter(grid.n), &grid, |b, grid| {
            b.iter(|| solve_fixed_lambda(&params, &spec, grid, None, &SolverOptions::default()).unwrap())
        });
    }
    group.finish();
}

fn fixed_mass(c: &mut Criterion) {
    let params = params(2, 1.0, 1.0);
    let spec = NonlinearitySpec::power(1.0);
    let grid = grid(&params, 0.02);
    c.bench_function("fixed_mass/d2p1", |b| {
        b.iter(|| {
            gradient_flow_minimize(&params, &spec, &grid, black_box(10.0), None, &SolverOptions::default()).unwrap()
        })
    });
}

fn shooting(c: &mut Criterion) {
    let mut group = c.benchmark_group("shooting");
    group.sample_size(10);
    for (d, p) in [(2, 1.0), (3, 2.0)] {
        let params = params(d, p, 1.0);
        let grid = grid(&params, 0.01);
        let spec = NonlinearitySpec::power(p);
        group.bench_function(format!("d{d}p{p}"), |b| {
            b.iter(|| shooting_solve(&params, &spec, &grid).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, fixed_lambda, fixed_mass, shooting);
criterion_main!(benches);
