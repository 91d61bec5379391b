use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use cuspcpm::closest_point::{ClosestPoint, DescentConfig, NearestParamCp, TwoStageCp};
use cuspcpm::spectral::{arclength, solve_on_curve, theta_samples, DEFAULT_QUAD_TOL};
use cuspcpm::{catalogue, ic};

fn spectral(c: &mut Criterion) {
    let curve = catalogue("cusp", 0.05).unwrap().curve().unwrap();
    let mut group = c.benchmark_group("spectral");
    group.sample_size(10);
    group.bench_function("arclength", |b| b.iter(|| arclength(curve.clone(), DEFAULT_QUAD_TOL).unwrap()));
    group.bench_function("solve_t0.1", |b| b.iter(|| solve_on_curve(curve.clone(), ic::cusp_theta, 1.0, 0.1, 1e-14).unwrap()));
    let sol = solve_on_curve(curve.clone(), ic::cusp_theta, 1.0, 1e-4, 1e-14).unwrap();
    let thetas = theta_samples(2048);
    group.bench_function("evaluate_2048_t1e-4", |b| b.iter(|| sol.evaluate_many(black_box(1e-4), &thetas)));
    group.finish();
}

fn closest_point(c: &mut Criterion) {
    let entry = catalogue("cusp", 1.0).unwrap();
    let two_stage = TwoStageCp::new(entry.system().clone(), DescentConfig::default()).unwrap();
    let nearest = NearestParamCp::new(entry.system().clone(), entry.parametrization(), 32, 4).unwrap();
    let x = [0.8, 0.3, 0.25];
    let mut group = c.benchmark_group("closest_point");
    group.bench_function("two_stage", |b| b.iter(|| two_stage.project(black_box(&x)).unwrap()));
    group.bench_function("nearest_param", |b| b.iter(|| nearest.project(black_box(&x)).unwrap()));
    group.finish();
}

criterion_group!(benches, spectral, closest_point);
criterion_main!(benches);
