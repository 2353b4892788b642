use std::f64::consts::PI;

use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use grwflow_core::flow::{cfl_dt, step, Integrator};
use grwflow_core::{exec, verify, FiberGrid, GraphState, WarpingFactor};

fn graph(n: usize) -> (FiberGrid, WarpingFactor, GraphState) {
    let g = FiberGrid::torus2(n, n, 2.0 * PI, 2.0 * PI).unwrap();
    let w = WarpingFactor::gaussian(-1.0, 2.0);
    let rho: Vec<f64> = (0..g.len())
        .map(|k| {
            let x = g.coords(k);
            0.5 + 0.2 * x[0].sin() * x[1].sin()
        })
        .collect();
    let s = GraphState::new(&g, &w, &rho, 1e-4).unwrap();
    (g, w, s)
}

fn rk2_step(c: &mut Criterion) {
    let mut group = c.benchmark_group("rk2_step");
    for n in [64, 128] {
        let (g, w, s) = graph(n);
        let dt = cfl_dt(&g, &s, 0.2);
        group.bench_with_input(BenchmarkId::new("pool", n), &n, |b, _| {
            b.iter(|| step(&g, &w, black_box(&s), dt, Integrator::Rk2, 1e-4).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("sequential", n), &n, |b, _| {
            b.iter(|| exec::sequential(|| step(&g, &w, black_box(&s), dt, Integrator::Rk2, 1e-4).unwrap()))
        });
    }
    group.finish();
}

fn spatial_identities(c: &mut Criterion) {
    let mut group = c.benchmark_group("spatial_identities");
    let (g, w, s) = graph(64);
    group.bench_function("pool", |b| b.iter(|| verify::check_spatial_identities(&g, &w, &s, 1e-4).unwrap()));
    group.bench_function("sequential", |b| {
        b.iter(|| exec::sequential(|| verify::check_spatial_identities(&g, &w, &s, 1e-4).unwrap()))
    });
    group.finish();
}

criterion_group!(benches, rk2_step, spatial_identities);
criterion_main!(benches);
