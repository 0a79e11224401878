use std::sync::Arc;

use criterion::{black_box, criterion_group, criterion_main, BatchSize, Criterion};

use lrising::contour::group_contours;
use lrising::sampler::{ChainState, EnsembleSpec};
use lrising::{build_kernel, build_triangles, enumerate, hamiltonian, EventSpec, ModelParams, Observables, SpinConfig};
use lrising_bench::{random_spins, sparse_spins};

fn geometry(c: &mut Criterion) {
    let s = random_spins(512, 1);
    c.bench_function("build_triangles L=512 random", |b| b.iter(|| build_triangles(black_box(&s))));
    let f = build_triangles(&s);
    c.bench_function("invariants_hold L=512 random", |b| b.iter(|| black_box(&f).invariants_hold()));
    let sparse = build_triangles(&sparse_spins(512, 12, 2));
    c.bench_function("group_contours L=512 sparse", |b| b.iter(|| group_contours(black_box(&sparse), 14.0)));
}

fn energy(c: &mut Criterion) {
    let p = ModelParams::new(0.3, 10.0, 2.0, 512).unwrap();
    let k = Arc::new(build_kernel(&p).unwrap());
    let s = random_spins(512, 3);
    c.bench_function("hamiltonian L=512", |b| b.iter(|| hamiltonian(black_box(&s), &k)));
    let cfg = SpinConfig::from_spins(s, k).unwrap();
    c.bench_function("flip_at + undo L=512", |b| {
        b.iter_batched(
            || cfg.clone(),
            |mut x| {
                x.flip_at(100);
                x.flip_at(100)
            },
            BatchSize::SmallInput,
        )
    });
}

fn sampler(c: &mut Criterion) {
    let p = ModelParams::new(0.3, 10.0, 2.0, 512).unwrap();
    let k = Arc::new(build_kernel(&p).unwrap());
    let spec = EnsembleSpec::free(1, 0);
    let mut ch = ChainState::new(SpinConfig::from_spins(sparse_spins(512, 4, 5), k).unwrap(), 7);
    c.bench_function("sweep L=512 beta=2", |b| b.iter(|| ch.sweep(&spec, p.beta)));
}

fn oracle(c: &mut Criterion) {
    let p = ModelParams::new(0.3, 5.0, 1.2, 8).unwrap();
    let mut g = c.benchmark_group("oracle");
    g.sample_size(10);
    g.bench_function("enumerate L=8", |b| {
        b.iter(|| enumerate(&p, &[EventSpec::All], &Observables::default()).unwrap())
    });
    g.finish();
}

criterion_group!(benches, geometry, energy, sampler, oracle);
criterion_main!(benches);
