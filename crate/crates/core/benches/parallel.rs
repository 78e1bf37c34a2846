use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::f64::consts::PI;

use vfl_core::compat::{gen_initial_from_displacement, DisplacementSpec};
use vfl_core::dynamics::{rhs_full, Integrator, MaterialParams, Scheme, SimState};
use vfl_core::fields::Grid;
use vfl_core::par::run_sequential;

fn rhs_sweep(c: &mut Criterion) {
    let params = MaterialParams::default();
    let mut group = c.benchmark_group("rhs_full");
    for (dim, n) in [(2, 128), (2, 256), (3, 32)] {
        let grid = Grid::periodic_cube(dim, n, 2.0 * PI).unwrap();
        let (state, _) = gen_initial_from_displacement(&DisplacementSpec::canonical(&grid, 1e-2), &grid).unwrap();
        let label = format!("{dim}d-{n}");
        group.bench_with_input(BenchmarkId::new("sequential", &label), &state, |b, s| {
            b.iter(|| run_sequential(|| rhs_full(s, &params, None).unwrap()))
        });
        group.bench_with_input(BenchmarkId::new("parallel", &label), &state, |b, s| {
            b.iter(|| rhs_full(s, &params, None).unwrap())
        });
    }
    group.finish();
}

fn rk4_step(c: &mut Criterion) {
    let params = MaterialParams::default();
    let grid = Grid::periodic_cube(2, 128, 2.0 * PI).unwrap();
    let (flow, _) = gen_initial_from_displacement(&DisplacementSpec::canonical(&grid, 1e-2), &grid).unwrap();
    let state = SimState { flow, sigma: None };
    let integrator = Integrator::new(&grid, params, Scheme::Rk4Explicit, None);
    let mut group = c.benchmark_group("rk4_step_2d_128");
    group.bench_function("sequential", |b| b.iter(|| run_sequential(|| integrator.step(&state, 1e-4).unwrap())));
    group.bench_function("parallel", |b| b.iter(|| integrator.step(&state, 1e-4).unwrap()));
    group.finish();
}

criterion_group!(benches, rhs_sweep, rk4_step);
criterion_main!(benches);
