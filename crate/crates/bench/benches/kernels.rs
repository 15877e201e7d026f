use std::hint::black_box;

use chaos_gamma::chaos2::sample_values;
use chaos_gamma::distances::{dtv_two_eig, mc_kolmogorov};
use chaos_gamma::gamma_ops::delta;
use chaos_gamma::numerics::{kummer_m, kummer_m_scaled};
use chaos_gamma::{family, GammaTarget};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn kummer(c: &mut Criterion) {
    let mut g = c.benchmark_group("kummer");
    for z in [-50.0, 0.5, 30.0] {
        g.bench_with_input(BenchmarkId::new("m", z), &z, |b, &z| b.iter(|| kummer_m(0.5, 1.0, black_box(z))));
    }
    g.bench_function("m_scaled 5000", |b| b.iter(|| kummer_m_scaled(0.5, 1.0, black_box(5000.0))));
    g.finish();
}

fn dtv(c: &mut Criterion) {
    let mut g = c.benchmark_group("dtv_two_eig");
    g.sample_size(20);
    for n in [10u64, 400] {
        let spec = family("concrete", n, None).unwrap();
        let (c1, c2) = (spec.coeffs()[0], spec.coeffs()[1]);
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| b.iter(|| dtv_two_eig(c1, c2)));
    }
    g.finish();
}

fn deltas(c: &mut Criterion) {
    let spec = family("ustat", 10_000, None).unwrap();
    c.bench_function("delta r=2 ustat(1e4)", |b| b.iter(|| delta(black_box(&spec), 2)));
}

fn sampling(c: &mut Criterion) {
    let mut g = c.benchmark_group("sampling");
    g.sample_size(10);
    let spec = family("delta", 100, Some(0.5)).unwrap();
    g.bench_function("chaos 1e5", |b| b.iter(|| sample_values(&spec, 100_000, black_box(1))));
    let target = GammaTarget::new(3.0).unwrap();
    g.bench_function("gamma 1e5", |b| b.iter(|| target.sample(100_000, black_box(1))));
    g.bench_function("mc_kolmogorov 1e5", |b| b.iter(|| mc_kolmogorov(&spec, 3.0, 100_000, black_box(1))));
    g.finish();
}

criterion_group!(benches, kummer, dtv, deltas, sampling);
criterion_main!(benches);
