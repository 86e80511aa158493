use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;
use tnr_bench::{small_peps, sweep_tt, sweep_ttm};
use tnr_core::norm::partial_norm;
use tnr_core::{frobenius_norm_sq, linear_norm, EnvironmentCache, Method};

fn full_norms(c: &mut Criterion) {
    let mut group = c.benchmark_group("full_norm");
    for (name, tn) in [
        ("tt_34x12x10", sweep_tt(0)),
        ("ttm_34x12x10", sweep_ttm(0)),
        ("peps_3x3", small_peps(0)),
    ] {
        group.bench_with_input(BenchmarkId::new("frobenius", name), &tn, |b, tn| {
            b.iter(|| frobenius_norm_sq(black_box(tn)))
        });
        group.bench_with_input(BenchmarkId::new("linear", name), &tn, |b, tn| {
            b.iter(|| linear_norm(black_box(tn)))
        });
    }
    group.finish();
}

fn cache_reuse(c: &mut Criterion) {
    let tn = sweep_ttm(1);
    let mut group = c.benchmark_group("partial_norm_n33");
    group.bench_function("from_scratch", |b| {
        b.iter(|| partial_norm(black_box(&tn), Method::Frobenius, 33).unwrap())
    });
    let mut cache = EnvironmentCache::new(Method::Frobenius);
    cache.extend_to(&tn, 32).unwrap();
    group.bench_function("extend_cached_prefix", |b| {
        b.iter(|| {
            let mut c = cache.clone();
            c.extend(black_box(&tn)).unwrap()
        })
    });
    group.finish();
}

criterion_group!(benches, full_norms, cache_reuse);
criterion_main!(benches);
