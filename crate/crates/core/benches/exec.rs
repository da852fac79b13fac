use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nchull::exec::Exec;
use nchull::extreme::escape_experiment;
use nchull::hull::converge_experiment;
use nchull::model::{default_example, ExampleOptions};
use nchull::pencil::{affine_experiment, AffineOptions};
use nchull::tol::Tolerances;

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn escape(c: &mut Criterion) {
    let model = default_example(&ExampleOptions::default()).unwrap().model;
    let tol = Tolerances::default();
    let mut group = c.benchmark_group("escape");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| escape_experiment(&model, 2, black_box(&[3, 5, 7]), 2, &[1, 2, 3, 4], &tol, exec).unwrap())
        });
    }
    group.finish();
}

fn affine(c: &mut Criterion) {
    let model = default_example(&ExampleOptions::default()).unwrap().model;
    let tol = Tolerances::default();
    let seeds: Vec<u64> = (1..=32).collect();
    let mut group = c.benchmark_group("affine");
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| affine_experiment(&model, &AffineOptions::default(), black_box(&seeds), &tol, exec).unwrap())
        });
    }
    group.finish();
}

fn converge(c: &mut Criterion) {
    let model = default_example(&ExampleOptions::default()).unwrap().model;
    let tol = Tolerances::default();
    let levels: Vec<usize> = (2..=12).collect();
    let seeds: Vec<u64> = (1..=64).collect();
    let mut group = c.benchmark_group("converge");
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| converge_experiment(&model, 2, 2, &levels, black_box(&seeds), &tol, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, escape, affine, converge);
criterion_main!(benches);
