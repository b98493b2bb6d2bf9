use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use stopbound_core::bounds::{compute_bound, Problem};
use stopbound_core::geometry::{Boundary, Side};
use stopbound_core::simulate::{run_brownian, run_discrete, SimOptions};
use stopbound_core::{DistributionSpec, Region, RegionKind, ScalarFamily, Schedule, TheoremTag};

fn sqrt_region() -> Region {
    Region::scalar(Boundary::Power { c: 3.0, gamma: 0.5 }, Side::Below, RegionKind::Continuity).unwrap()
}

fn coin() -> DistributionSpec {
    DistributionSpec::Scalar(ScalarFamily::BernoulliAffine { x0: -1.0, x1: 1.0, p: 0.75 })
}

fn geometry(c: &mut Criterion) {
    let hooked = sqrt_region();
    let searched = sqrt_region().without_hooks();
    c.bench_function("find_m/closed_form", |b| b.iter(|| hooked.find_m(black_box(&[0.5]), 1e-12).unwrap()));
    c.bench_function("find_m/bisection", |b| b.iter(|| searched.find_m(black_box(&[0.5]), 1e-12).unwrap()));
    c.bench_function("rho/bisection", |b| b.iter(|| searched.rho(black_box(60.0), &[0.5]).unwrap()));
}

fn bounds(c: &mut Criterion) {
    let p = Problem::new(coin(), sqrt_region(), Schedule::all_naturals()).unwrap();
    for tag in [TheoremTag::T10Upper, TheoremTag::T16ChenLordenIII, TheoremTag::T18Concentration] {
        c.bench_function(&format!("bound/{tag}"), |b| b.iter(|| compute_bound(black_box(tag), &p)));
    }
}

fn simulation(c: &mut Criterion) {
    let mut group = c.benchmark_group("simulate");
    group.sample_size(10);
    let opts = SimOptions { n_runs: 10_000, seed: 1, ..SimOptions::default() };
    group.bench_function("discrete/10k", |b| {
        b.iter(|| run_discrete(&sqrt_region(), &coin(), &Schedule::all_naturals(), black_box(&opts)).unwrap())
    });
    let level = Region::scalar(Boundary::Constant { c: 4.0 }, Side::Below, RegionKind::Continuity).unwrap();
    let opts = SimOptions { n_runs: 1_000, seed: 1, ..SimOptions::default() };
    group.bench_function("brownian/1k", |b| {
        b.iter(|| run_brownian(&level, &[0.5], &[1.0], 0.01, 1000.0, black_box(&opts)).unwrap())
    });
    group.finish();
}

criterion_group!(benches, geometry, bounds, simulation);
criterion_main!(benches);
