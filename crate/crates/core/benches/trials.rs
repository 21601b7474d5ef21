//! Parallel vs sequential trial mapping on two workloads: Feynman-Kac
//! weights of a winding pair and Haar plaquette traces.

use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use holonomy::connection::Connection;
use holonomy::exec::{map_trials, map_trials_sequential, trial_rng};
use holonomy::harness::torus_fixtures;
use holonomy::measures::{FkMode, FkSetup};
use holonomy::topology::{Graph, PlaquetteIndex};
use num_complex::Complex64;

fn fk_weights(c: &mut Criterion) {
    let g = Arc::new(Graph::torus(3, 2).unwrap());
    let idx = PlaquetteIndex::new(&g).unwrap();
    let m0 = Connection::haar(g.clone(), 2, &mut trial_rng(1, 0));
    let loops = torus_fixtures(&g).unwrap().into_iter().find(|(n, _)| *n == "winding_and_reverse").unwrap().1;
    let setup = FkSetup::new(&m0, &loops, 0.1, FkMode::SmPlusMinus).plaquettes(&idx);
    let trial = |i: usize| setup.weight(&mut trial_rng(2, i as u64)).unwrap();

    let mut group = c.benchmark_group("fk_weights");
    for n in [256, 2048] {
        group.bench_with_input(BenchmarkId::new("parallel", n), &n, |b, &n| b.iter(|| map_trials(n, trial)));
        group.bench_with_input(BenchmarkId::new("sequential", n), &n, |b, &n| {
            b.iter(|| map_trials_sequential(n, trial))
        });
    }
    group.finish();
}

fn haar_plaquettes(c: &mut Criterion) {
    let g = Arc::new(Graph::torus(3, 2).unwrap());
    let p = torus_fixtures(&g).unwrap().into_iter().find(|(n, _)| *n == "plaquette").unwrap().1;
    let trial = |i: usize| -> Complex64 { Connection::haar(g.clone(), 3, &mut trial_rng(3, i as u64)).tau(&p).unwrap() };

    let mut group = c.benchmark_group("haar_plaquettes");
    for n in [256, 2048] {
        group.bench_with_input(BenchmarkId::new("parallel", n), &n, |b, &n| b.iter(|| map_trials(n, trial)));
        group.bench_with_input(BenchmarkId::new("sequential", n), &n, |b, &n| {
            b.iter(|| map_trials_sequential(n, trial))
        });
    }
    group.finish();
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = fk_weights, haar_plaquettes
}
criterion_main!(benches);
