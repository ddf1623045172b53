use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use iboss_bench::normal_data;
use iboss_core::{estimate, Method, MethodOptions, StreamKey};

fn dopt_vs_full(c: &mut Criterion) {
    let mut g = c.benchmark_group("fit");
    g.sample_size(10);
    let opts = MethodOptions::default();
    for p in [20, 100] {
        let data = normal_data(200_000, p, 3);
        for method in [Method::Dopt, Method::Uni, Method::Full] {
            g.bench_with_input(BenchmarkId::new(method.to_string(), p), &data, |b, d| {
                let mut rng = StreamKey::new(4).rng();
                b.iter(|| estimate(method, d, 1000, &opts, &mut rng).unwrap())
            });
        }
    }
    g.finish();
}

criterion_group!(benches, dopt_vs_full);
criterion_main!(benches);
