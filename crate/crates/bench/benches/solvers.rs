use std::hint::black_box;
use std::time::Duration;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use dissim_bench::{atomic, linear_field, Z};
use dissim_core::cauchy;
use dissim_core::criteria::{self, CriteriaConfig};
use dissim_core::{charfunc, oracle, NodeSamples, SolverOptions, ZGrid};

fn char_fn(c: &mut Criterion) {
    let opts = SolverOptions::default();
    let mut g = c.benchmark_group("char_fn");
    for n in [16, 64, 256] {
        let spec = atomic(n, 3, 2, n as u64);
        g.bench_with_input(BenchmarkId::new("sweep", n), &spec, |b, s| {
            b.iter(|| charfunc::char_fn(s, black_box(Z), &opts).unwrap())
        });
        if n <= 64 {
            g.bench_with_input(BenchmarkId::new("dense", n), &spec, |b, s| {
                b.iter(|| oracle::direct_char_fn(s, black_box(Z)).unwrap())
            });
        }
    }
    for nodes in [128, 512] {
        let spec = linear_field(nodes);
        g.bench_with_input(BenchmarkId::new("lebesgue", nodes), &spec, |b, s| {
            b.iter(|| charfunc::char_fn(s, black_box(Z), &opts).unwrap())
        });
    }
    g.finish();
}

fn large_rank(c: &mut Criterion) {
    // rank N, dim_H 1: every atom step goes through the small side
    let opts = SolverOptions::default();
    let mut g = c.benchmark_group("cluster");
    g.sample_size(20);
    for n in [25, 50, 100] {
        let spec = oracle::example_3_11_cluster(n).unwrap();
        g.bench_with_input(BenchmarkId::new("char_fn", n), &spec, |b, s| {
            b.iter(|| charfunc::char_fn(s, black_box(Z), &opts).unwrap())
        });
    }
    g.finish();
}

fn resolvent_and_picard(c: &mut Criterion) {
    let opts = SolverOptions::default();
    let spec = atomic(64, 3, 2, 7);
    let h = NodeSamples::from_fn(spec.measure(), |x| {
        dissim_core::CVec::from_element(3, dissim_core::linalg::real(x))
    });
    c.bench_function("resolvent/64", |b| {
        b.iter(|| cauchy::resolvent_apply(&spec, black_box(Z), &h, &opts).unwrap())
    });
    let z = dissim_core::linalg::c64(0.3, 2.0 * spec.bounded_region_threshold());
    c.bench_function("picard/64x25", |b| {
        b.iter(|| cauchy::solve_g_picard(&spec, black_box(z), 25, &opts).unwrap())
    });
}

fn criteria_report(c: &mut Criterion) {
    let spec = atomic(16, 2, 1, 3);
    let config = CriteriaConfig {
        grid: Some(ZGrid::new(-2.0, 2.0, 1e-2, 1e2, 16, 16).unwrap()),
        ..CriteriaConfig::default()
    };
    let mut g = c.benchmark_group("criteria");
    g.sample_size(10).measurement_time(Duration::from_secs(10));
    g.bench_function("evaluate/16x16", |b| {
        b.iter(|| criteria::evaluate(&spec, &config).unwrap())
    });
    g.finish();
}

criterion_group!(benches, char_fn, large_rank, resolvent_and_picard, criteria_report);
criterion_main!(benches);
