use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use lqr_core::instances::{example_5_1, random_plant, random_unit_vector, RandomShape};
use lqr_core::*;

fn plant(n: usize) -> Plant {
    random_plant(
        n as u64,
        RandomShape {
            n: Some(n),
            m: Some(n.min(3)),
        },
    )
}

fn lyapunov(c: &mut Criterion) {
    let mut group = c.benchmark_group("lyapunov");
    for n in [2, 4, 6] {
        let p = plant(n);
        let f = p.closed_loop(&solve_care(&p).unwrap().k_star).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| solve_lyapunov(black_box(&f), black_box(p.w())).unwrap())
        });
    }
    group.finish();
}

fn care(c: &mut Criterion) {
    let mut group = c.benchmark_group("care");
    for n in [2, 4, 6] {
        let p = plant(n);
        group.bench_with_input(BenchmarkId::new("schur", n), &n, |b, _| {
            b.iter(|| solve_care(black_box(&p)).unwrap())
        });
        let k0 = stabilizing_gain(&p).unwrap();
        group.bench_with_input(BenchmarkId::new("newton_kleinman", n), &n, |b, _| {
            b.iter(|| newton_kleinman(black_box(&p), &k0, 100, 1e-12).unwrap())
        });
    }
    group.finish();
}

fn gradient_eval(c: &mut Criterion) {
    let p = plant(6);
    let k = stabilizing_gain(&p).unwrap();
    c.bench_function("gradient/6", |b| {
        b.iter(|| gradient(black_box(&p), black_box(&k)).unwrap())
    });
    c.bench_function("certify/6", |b| b.iter(|| certify(black_box(&p)).unwrap()));
}

fn simulation(c: &mut Criterion) {
    let inst = example_5_1();
    let k = Mat::from_element(1, 1, -1.0);
    let x0 = inst.x0.clone().unwrap();
    c.bench_function("simulate/example-5-1", |b| {
        b.iter(|| simulate_closed_loop(black_box(&inst.plant), &k, &x0, 40.0, 0.01).unwrap())
    });
    let p = plant(4);
    let k = solve_care(&p).unwrap().k_star;
    let x0 = random_unit_vector(0, 4);
    c.bench_function("simulate_adaptive/4", |b| {
        b.iter(|| simulate_adaptive(black_box(&p), &k, &x0).unwrap())
    });
}

criterion_group!(benches, lyapunov, care, gradient_eval, simulation);
criterion_main!(benches);
