use std::hint::black_box;

use avalanche_bench::{avalanche_workloads, percolation_workloads};
use avalanche_core::coupling::CouplingOptions;
use avalanche_core::{grow_cluster, run_coupled, run_with_engine, trial_rng, Caps, Engine, GraphKind, Threshold};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn avalanches(c: &mut Criterion) {
    let mut group = c.benchmark_group("avalanche");
    for w in avalanche_workloads() {
        for engine in [Engine::Classic, Engine::Forgetful] {
            group.bench_with_input(BenchmarkId::new(engine.to_string(), w.name), &w, |b, w| {
                let mut seed = 0;
                b.iter(|| {
                    seed += 1;
                    let mut rng = trial_rng(seed, 0);
                    black_box(run_with_engine(engine, w.graph, w.p, w.caps, &mut rng))
                });
            });
        }
    }
    group.finish();
}

fn percolation(c: &mut Criterion) {
    let mut group = c.benchmark_group("grow_cluster");
    for w in percolation_workloads() {
        group.bench_with_input(BenchmarkId::from_parameter(w.name), &w, |b, w| {
            let mut seed = 0;
            b.iter(|| {
                seed += 1;
                let mut rng = trial_rng(seed, 0);
                black_box(grow_cluster(w.graph, w.p, w.caps.range, &mut rng))
            });
        });
    }
    group.finish();
}

fn coupling(c: &mut Criterion) {
    let graph = GraphKind::lattice(1).unwrap();
    let p = Threshold::new(0.5).unwrap();
    let caps = Caps::new(10_000, 1_000_000).unwrap();
    c.bench_function("coupled_zd1_p0.5", |b| {
        let mut seed = 0;
        b.iter(|| {
            seed += 1;
            let mut rng = trial_rng(seed, 0);
            black_box(run_coupled(graph, p, caps, CouplingOptions::default(), &mut rng).unwrap())
        });
    });
}

criterion_group!(benches, avalanches, percolation, coupling);
criterion_main!(benches);
