use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use mltsr_core::harness::{random_model, random_signal_model, trial_rng, StreamDomain};
use mltsr_core::mapp::{mapp_recursive, mapp_search};
use mltsr_core::sequence::{mlt_from_model, validate_structure};
use mltsr_core::steering::{md_steering_vector, model_signal};
use mltsr_core::superres::{conv_relax, lift_shape, AdmmConfig, ObservationModel};
use mltsr_core::Shape;

fn bench_structure(c: &mut Criterion) {
    let shape = Shape::new(vec![16, 16]).unwrap();
    c.bench_function("steering_16x16", |b| {
        b.iter(|| md_steering_vector(&shape, black_box(&[0.37, 0.81])).unwrap())
    });

    let mut rng = trial_rng(7, StreamDomain::Adhoc, 10, 0);
    let model = random_model(2, 4, 0.05, &mut rng).unwrap();
    let small = Shape::new(vec![6, 8]).unwrap();
    c.bench_function("build_mlt_6x8_r4", |b| {
        b.iter(|| mlt_from_model(&small, black_box(&model)).unwrap())
    });
    let t = mlt_from_model(&small, &model).unwrap();
    c.bench_function("validate_6x8", |b| {
        b.iter(|| validate_structure(black_box(&t), &small, 1e-9).unwrap())
    });
}

fn bench_decompose(c: &mut Criterion) {
    let shape = Shape::new(vec![6, 8]).unwrap();
    let mut rng = trial_rng(7, StreamDomain::Adhoc, 11, 0);
    let low = random_model(2, 4, 0.05, &mut rng).unwrap();
    let t_low = mlt_from_model(&shape, &low).unwrap();
    c.bench_function("mapp_recursive_6x8_r4", |b| {
        b.iter(|| mapp_recursive(black_box(&t_low), &shape, 1e-8).unwrap())
    });

    let high = random_model(2, 12, 0.02, &mut rng).unwrap();
    let t_high = mlt_from_model(&shape, &high).unwrap();
    c.bench_function("mapp_search_6x8_r12", |b| {
        b.iter(|| mapp_search(black_box(&t_high), &shape, 12, 1e-8).unwrap())
    });
}

fn bench_solver(c: &mut Criterion) {
    let shape = Shape::new(vec![4, 4]).unwrap();
    let mut rng = trial_rng(7, StreamDomain::Adhoc, 12, 0);
    let model = random_signal_model(2, 2, 0.1, &mut rng).unwrap();
    let y = model_signal(&shape, &model).unwrap();
    let obs = ObservationModel::full(shape.clone(), y, 0.0).unwrap();
    let lifted = lift_shape(&shape, 0).unwrap();
    let mut group = c.benchmark_group("solver");
    group.sample_size(10);
    group.bench_function("convrelax_4x4_full", |b| {
        b.iter(|| conv_relax(black_box(&obs), &lifted, &AdmmConfig::default()).unwrap())
    });
    group.finish();
}

criterion_group!(benches, bench_structure, bench_decompose, bench_solver);
criterion_main!(benches);
