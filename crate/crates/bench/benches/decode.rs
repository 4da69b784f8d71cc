use ces_bench::emissions;
use ces_core::viterbi::{decode, TransitionModel};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use std::hint::black_box;

fn viterbi(c: &mut Criterion) {
    let tm = TransitionModel::uniform();
    let mut group = c.benchmark_group("viterbi");
    for n in [8, 64, 350] {
        let em = emissions(n, 1);
        group.throughput(Throughput::Elements(n as u64));
        group.bench_with_input(BenchmarkId::from_parameter(n), &em, |b, em| {
            b.iter(|| decode(black_box(em), &tm).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, viterbi);
criterion_main!(benches);
