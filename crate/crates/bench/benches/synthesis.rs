use std::time::Duration;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use synccount_bench::params;
use synccount_core::cegar::{self, CegarOptions};
use synccount_core::direct::{self, SynthOptions};
use synccount_core::AlgorithmClass;

fn encoding(c: &mut Criterion) {
    let mut group = c.benchmark_group("encode");
    for t in [3, 7] {
        group.bench_with_input(BenchmarkId::new("cyclic_4_1_3", t), &t, |b, &t| {
            b.iter(|| direct::encode(params(4, 1, 3, t), AlgorithmClass::Cyclic).unwrap())
        });
    }
    group.bench_function("general_4_1_3_7", |b| {
        b.iter(|| direct::encode(params(4, 1, 3, 7), AlgorithmClass::General).unwrap())
    });
    let instance = direct::encode(params(4, 1, 3, 7), AlgorithmClass::Cyclic).unwrap();
    group.bench_function("emit_dimacs", |b| b.iter(|| direct::emit_dimacs(&instance)));
    group.finish();
}

fn solving(c: &mut Criterion) {
    let mut group = c.benchmark_group("synthesize");
    group.sample_size(10).measurement_time(Duration::from_secs(20));
    group.bench_function("direct_cyclic_4_1_3_7", |b| {
        b.iter(|| direct::synthesize(params(4, 1, 3, 7), AlgorithmClass::Cyclic, &SynthOptions::default()).unwrap())
    });
    group.bench_function("direct_general_4_1_2_6_unsat", |b| {
        b.iter(|| direct::synthesize(params(4, 1, 2, 6), AlgorithmClass::General, &SynthOptions::default()).unwrap())
    });
    group.bench_function("cegar_general_4_1_2_unsat", |b| {
        b.iter(|| {
            cegar::run_overshoot(
                params(4, 1, 2, 1),
                AlgorithmClass::General,
                None,
                &CegarOptions::default(),
                &mut |_| {},
            )
            .unwrap()
        })
    });
    group.finish();
}

criterion_group!(benches, encoding, solving);
criterion_main!(benches);
