use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use trimcast_core::encoder::EncoderConfig;
use trimcast_core::instancegen::{default_config, generate};
use trimcast_core::models::{mlp_init, SparseInput};
use trimcast_core::trimsolver::{solve_initial, SolverConfig};
use trimcast_core::{feature_vector, reduce, Budget, CancelToken, Family, ReduceConfig};

fn bench(c: &mut Criterion) {
    let inst = generate(&default_config(Family::F).unwrap(), 7).unwrap();
    let initial = solve_initial(&inst, &SolverConfig::default()).unwrap();

    c.bench_function("solve_initial/F", |b| {
        b.iter(|| solve_initial(black_box(&inst), &SolverConfig::default()).unwrap())
    });

    let cfg = ReduceConfig {
        budget: Budget::nodes(1_000_000),
        ..ReduceConfig::default()
    };
    c.bench_function("reduce/F/1M nodes", |b| {
        b.iter(|| reduce(black_box(&initial), &inst, &cfg, &CancelToken::new()).unwrap())
    });

    let enc = EncoderConfig::default();
    c.bench_function("encode/F", |b| {
        b.iter(|| feature_vector(black_box(&initial), inst.master_width, &enc).unwrap())
    });

    let x = feature_vector(&initial, inst.master_width, &enc).unwrap();
    let model = mlp_init(&[x.len(), 100, 100, 1], 0).unwrap();
    c.bench_function("forward/dense", |b| b.iter(|| model.forward(black_box(&x)).unwrap()));
    let sparse = SparseInput::from_dense(&x);
    c.bench_function("forward/sparse", |b| {
        b.iter(|| model.forward_sparse(black_box(&sparse)).unwrap())
    });
}

criterion_group!(benches, bench);
criterion_main!(benches);
