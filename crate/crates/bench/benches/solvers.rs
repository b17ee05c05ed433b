use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use te_core::demands::{generate, DemandConfig};
use te_core::raecke::raecke_scheme;
use te_core::{
    bundled, ksp, mcf_mw, semi_mcf, simulate, spf, AlgorithmKind, KspConfig, MwConfig, PathSelector, RaeckeConfig,
    SimConfig,
};

fn routing(c: &mut Criterion) {
    let topo = bundled::abilene();
    c.bench_function("spf/abilene", |b| b.iter(|| spf(black_box(&topo)).unwrap()));
    c.bench_function("ksp4/abilene", |b| b.iter(|| ksp(black_box(&topo), &KspConfig { k: 4 }).unwrap()));
    c.bench_function("raecke/abilene", |b| b.iter(|| raecke_scheme(black_box(&topo), &RaeckeConfig::default()).unwrap()));
}

fn flows(c: &mut Criterion) {
    let topo = bundled::abilene();
    let tm = generate(&topo, &DemandConfig { num_tms: 1, ..DemandConfig::default() }).unwrap().actual.remove(0);
    let mw = MwConfig::default();
    c.bench_function("mcf_mw/abilene", |b| b.iter(|| mcf_mw(&topo, black_box(&tm), &mw).unwrap()));
    let base = raecke_scheme(&topo, &RaeckeConfig::default()).unwrap();
    c.bench_function("semi_mcf/abilene", |b| b.iter(|| semi_mcf(&topo, black_box(&tm), &base, &mw).unwrap()));
}

fn simulation(c: &mut Criterion) {
    let topo = bundled::abilene();
    let set = generate(&topo, &DemandConfig { num_tms: 1, scale: 2.5, ..DemandConfig::default() }).unwrap();
    // one matrix, one step: scheme set-up plus a single progressive filling
    let cfg = SimConfig { steps_per_tm: 1, ..SimConfig::default() };
    let mut group = c.benchmark_group("simulate_step");
    for kind in [AlgorithmKind::Spf, AlgorithmKind::SemiMcf(PathSelector::Raecke)] {
        group.bench_function(kind.name(), |b| {
            b.iter(|| simulate(&topo, kind, black_box(&set.actual), &set.predicted, &cfg).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, routing, flows, simulation);
criterion_main!(benches);
