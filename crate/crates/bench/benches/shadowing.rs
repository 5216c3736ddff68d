use std::hint::black_box;
use std::sync::OnceLock;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use lorenz_pssp::flow::FlowSpec;
use lorenz_pssp::flow_shadow::{derive_flow_constants, run_flow_shadowing, FlowConstants, FlowOrbitMode};
use lorenz_pssp::shadow1d::{
    build_interval_chain, generate_pseudo_orbit_1d, solve_shadow_point_1d, OrbitMode, ShadowVariant,
};
use lorenz_pssp::shadow2d::{generate_pseudo_orbit_2d, solve_shadow_point_2d};
use lorenz_pssp::{check_conditions, derive_map_constants, LorenzMapSpec};

fn flow_constants() -> &'static FlowConstants {
    static K: OnceLock<FlowConstants> = OnceLock::new();
    K.get_or_init(|| derive_flow_constants(&FlowSpec::reference(), 0.6).unwrap())
}

fn map_benches(c: &mut Criterion) {
    let spec = LorenzMapSpec::reference();
    let k = derive_map_constants(&spec, 0.64).unwrap();
    c.bench_function("check_conditions/1e5", |b| b.iter(|| check_conditions(black_box(&spec), 100_000)));

    let mut g = c.benchmark_group("shadow1d");
    for n in [1_000usize, 10_000] {
        let pseudo = generate_pseudo_orbit_1d(&spec, &k, n, 7, OrbitMode::GammaCrossing).unwrap();
        g.bench_with_input(BenchmarkId::new("chain+solve", n), &pseudo, |b, p| {
            b.iter(|| {
                let chain = build_interval_chain(&spec, p, &k).unwrap();
                solve_shadow_point_1d(&spec, &chain, p, &k, ShadowVariant::Infinite).unwrap()
            })
        });
    }
    g.finish();

    let mut g = c.benchmark_group("shadow2d");
    for n in [1_000usize, 10_000] {
        let pseudo = generate_pseudo_orbit_2d(&spec, &k, n, 7, OrbitMode::Noise).unwrap();
        g.bench_with_input(BenchmarkId::new("solve", n), &pseudo, |b, p| {
            b.iter(|| solve_shadow_point_2d(&spec, p, &k, ShadowVariant::Infinite).unwrap())
        });
    }
    g.finish();
}

fn flow_benches(c: &mut Criterion) {
    let fs = FlowSpec::reference();
    let k = flow_constants();
    let mut g = c.benchmark_group("flow");
    g.sample_size(10);
    for mode in [FlowOrbitMode::Noise, FlowOrbitMode::Gamma] {
        g.bench_function(BenchmarkId::new("pipeline/2000", mode), |b| {
            b.iter(|| run_flow_shadowing(&fs, k, 2000, 3, mode).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, map_benches, flow_benches);
criterion_main!(benches);
