use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use helmdef::transfers::{prolong_vec, restrict_vec};
use helmdef_bench::input;

fn transfers(c: &mut Criterion) {
    let mut g = c.benchmark_group("transfers");
    for n in [257usize, 513, 1025] {
        let fine = input(n * n);
        let (coarse, _, _) = restrict_vec(&fine, n, n).unwrap();
        g.throughput(Throughput::Elements((n * n) as u64));
        g.bench_with_input(BenchmarkId::new("restrict", n), &n, |b, _| b.iter(|| restrict_vec(&fine, n, n).unwrap()));
        g.bench_with_input(BenchmarkId::new("prolong", n), &n, |b, _| b.iter(|| prolong_vec(&coarse, n, n).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, transfers);
criterion_main!(benches);
