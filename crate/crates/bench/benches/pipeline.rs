use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use orbitcp_bench::fixture;
use orbitcp_core::experiment::score_pool;
use orbitcp_core::stats::{cvar, volume_gap, EmpiricalDistribution, VolumeSpec};
use orbitcp_core::{calibrate_values, ActionConvention, Group, GroupSpec, Provenance, ScoreFn};

fn scoring(c: &mut Criterion) {
    let (samples, base) = fixture(500, 1);
    let mut g = c.benchmark_group("score_pool");
    for spec in [
        GroupSpec::Cyclic(4),
        GroupSpec::Cyclic(8),
        GroupSpec::So2MonteCarlo { samples: 64, seed: 1 },
    ] {
        let group = Arc::new(Group::new(spec).unwrap());
        g.bench_with_input(BenchmarkId::from_parameter(spec), &group, |b, group| {
            b.iter(|| {
                score_pool(ScoreFn::EuclideanFull, &base, Some(group), ActionConvention::LastObserved, &samples).unwrap()
            })
        });
    }
    g.finish();
}

fn calibration(c: &mut Criterion) {
    let (samples, base) = fixture(2000, 2);
    let scores = score_pool(ScoreFn::EuclideanFull, &base, None, ActionConvention::LastObserved, &samples).unwrap();
    c.bench_function("calibrate_m2000", |b| {
        b.iter(|| calibrate_values(black_box(&scores.plain), 0.05, Provenance::Plain).unwrap())
    });
    let d = EmpiricalDistribution::from_slice(&scores.plain).unwrap();
    c.bench_function("cvar_0.95", |b| b.iter(|| cvar(black_box(&d), 0.95).unwrap()));
    let shifted = EmpiricalDistribution::new(scores.plain.iter().map(|v| v * 0.8).collect()).unwrap();
    let vol = VolumeSpec::for_score(ScoreFn::EuclideanFull, 12).unwrap();
    c.bench_function("volume_gap_256", |b| {
        b.iter(|| volume_gap(black_box(&d), &shifted, 0.05, &vol, 256, 1e-9).unwrap())
    });
}

criterion_group!(benches, scoring, calibration);
criterion_main!(benches);
