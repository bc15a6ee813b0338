use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use sqc_bench::fixture;
use sqc_core::{
    evaluate_direct, oracle_lcore, scan_shift, solve_core_brute, solve_lcore, EvalParams,
    LcoreOptions, PathLocus,
};

fn lcore(c: &mut Criterion) {
    let params = EvalParams::default();
    let mut group = c.benchmark_group("solve_lcore");
    group.sample_size(10);
    for n in [20, 50, 90, 140] {
        let inst = fixture(n, 1, 0.4);
        group.bench_with_input(BenchmarkId::from_parameter(n), &inst, |b, inst| {
            b.iter(|| solve_lcore(inst, black_box(10.0), &params, &LcoreOptions::default()).unwrap())
        });
    }
    group.finish();
}

fn oracle_vs_sliding(c: &mut Criterion) {
    let params = EvalParams::default();
    let inst = fixture(12, 3, 0.2);
    let stepped = LcoreOptions {
        step: Some(0.5),
        ..LcoreOptions::default()
    };
    let mut group = c.benchmark_group("n12_l3");
    group.bench_function("sliding_step_0.5", |b| {
        b.iter(|| solve_lcore(&inst, 3.0, &params, &stepped).unwrap())
    });
    group.bench_function("oracle_grid_0.5", |b| {
        b.iter(|| oracle_lcore(&inst, 3.0, &params, 0.5).unwrap())
    });
    group.finish();
}

fn evaluation(c: &mut Criterion) {
    let params = EvalParams::default();
    let inst = fixture(90, 2, 0.3);
    let leaves = inst.leaves();
    let (a, b) = (leaves[0], leaves[leaves.len() - 1]);
    let path = PathLocus::between(&inst, a, b);
    let l = (inst.distance(a, b) / 2.0).max(1.0);
    c.bench_function("evaluate_direct_n90", |bch| {
        bch.iter(|| evaluate_direct(&inst, black_box(&path), &params).unwrap())
    });
    c.bench_function("scan_shift_n90", |bch| {
        bch.iter(|| scan_shift(&inst, a, b, black_box(l), &params, None).unwrap())
    });
    let small = fixture(30, 4, 0.3);
    c.bench_function("core_brute_n30", |bch| {
        bch.iter(|| solve_core_brute(black_box(&small), &params).unwrap())
    });
}

criterion_group!(benches, lcore, oracle_vs_sliding, evaluation);
criterion_main!(benches);
