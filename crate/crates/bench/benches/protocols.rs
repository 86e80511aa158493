use criterion::{criterion_group, criterion_main, BatchSize, BenchmarkId, Criterion};
use tnr_bench::{overflowing_tt, sweep_tt};
use tnr_core::harness::{run_combination, Combination, SweepSpec, SweepStructure};
use tnr_core::{ftnr, ltnr, Method, RenormConfig};

fn protocols(c: &mut Criterion) {
    let mut group = c.benchmark_group("protocol");
    for n in [20usize, 40] {
        let tn = overflowing_tt(n);
        group.bench_with_input(BenchmarkId::new("ftnr_overflowing", n), &tn, |b, tn| {
            let cfg = RenormConfig::for_layer(Method::Frobenius, tn);
            b.iter_batched(
                || tn.clone(),
                |mut t| ftnr(&mut t, &cfg).unwrap(),
                BatchSize::SmallInput,
            )
        });
        group.bench_with_input(BenchmarkId::new("ltnr_overflowing", n), &tn, |b, tn| {
            let cfg = RenormConfig::for_layer(Method::Linear, tn);
            b.iter_batched(
                || tn.clone(),
                |mut t| ltnr(&mut t, &cfg).unwrap(),
                BatchSize::SmallInput,
            )
        });
    }
    let tn = sweep_tt(3);
    group.bench_function("ftnr_in_range_tt_34", |b| {
        let cfg = RenormConfig::new(Method::Frobenius, 12f64.powi(34));
        b.iter_batched(
            || tn.clone(),
            |mut t| ftnr(&mut t, &cfg).unwrap(),
            BatchSize::SmallInput,
        )
    });
    group.finish();
}

fn sweep_point(c: &mut Criterion) {
    let spec = SweepSpec::new(
        vec![SweepStructure::Ttm],
        vec![Method::Frobenius],
        vec![34],
        vec![12],
        vec![10],
        vec![0],
    );
    let combo: Combination = spec.combinations()[0];
    c.bench_function("sweep_combination_ttm_34x12x10", |b| {
        b.iter(|| run_combination(&spec, &combo))
    });
}

criterion_group!(benches, protocols, sweep_point);
criterion_main!(benches);
